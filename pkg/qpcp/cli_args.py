import argparse
import enum
import os

import qpcp.options


class EnumAction(argparse.Action):
    """
    Argparse action for handling Enums
    """
    def __init__(self, **kwargs):
        enum_type = kwargs.pop("type", None)

        if enum_type is None:
            raise ValueError("type must be assigned an Enum when using EnumAction")
        if not issubclass(enum_type, enum.Enum):
            raise TypeError("type must be an Enum when using EnumAction")

        choices = tuple(e.value for e in enum_type)
        kwargs.setdefault("choices", choices)
        kwargs.setdefault("metavar", f"[{','.join(list(choices))}]")

        super(EnumAction, self).__init__(**kwargs)

        self._enum = enum_type

    def __call__(self, parser, namespace, values, option_string=None):
        value = self._enum(values)
        setattr(namespace, self.dest, value)


class HashFunction(enum.Enum):
    MD5 = "md5"
    SHA1 = "sha1"
    SHA256 = "sha256"
    SHA512 = "sha512"


class FixtureFamily(enum.Enum):
    REJECT_ALWAYS = "reject-always"
    ACCEPT_ALWAYS = "accept-always"
    RANDOM_Q1 = "random-q1"
    RANDOM_Q2 = "random-q2"
    GHZ_CLDM = "ghz-cldm"
    PRODUCT_KSEP = "product-ksep"


def _default_max_qubits():
    try:
        return int(os.environ.get("QPCP_MAX_QUBITS", "14"))
    except ValueError:
        return 14


parser = argparse.ArgumentParser(prog="qpcp", description="Desk-scale laboratory for quantum PCP verifiers and local Hamiltonians.")

parser.add_argument("--verbose", default='INFO', const='DEBUG', nargs="?", choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'], help='Set the logging level')
parser.add_argument("--log-stdout", action="store_true", help="Send normal process output to stdout instead of stderr (default).")
parser.add_argument("--output-directory", type=str, default=None, help="Set the directory reports and generated files are written to.")
parser.add_argument("--input-directory", type=str, default=None, help="Set the directory spec, proof and witness files are read from.")
parser.add_argument("--fixtures-directory", type=str, default=None, help="Set the directory holding bundled fixtures.")
parser.add_argument("--max-qubits", type=int, default=_default_max_qubits(), help="Cap on the total number of simulated qubits (env: QPCP_MAX_QUBITS).")
parser.add_argument("--default-hashing-function", type=str, choices=[h.value for h in HashFunction], default=HashFunction.SHA256.value, help="Hash used for report body digests.")
parser.add_argument("--disable-progress-bar", action="store_true", help="Disable tqdm progress bars.")

subparsers = parser.add_subparsers(dest="command")


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="Master seed; every random draw derives from it.")


def _add_report(p):
    p.add_argument("--report", type=str, default=None, help="Report JSON path (default: <output-directory>/<command>_report.json).")


verify = subparsers.add_parser("verify", help="Acceptance probability of a verifier on a proof.")
verify.add_argument("--spec", type=str, required=True, help="Verifier spec JSON.")
verify.add_argument("--proof", type=str, required=True, help="Proof density matrix (or state vector) JSON.")
verify.add_argument("--input", type=str, default="", help="Input bitstring x.")
verify_mode = verify.add_mutually_exclusive_group(required=True)
verify_mode.add_argument("--exact", action="store_true", help="Exact branching simulation.")
verify_mode.add_argument("--shots", type=int, default=None, help="Number of Monte-Carlo runs.")
_add_seed(verify)
_add_report(verify)

reduce = subparsers.add_parser("reduce", help="Local Hamiltonian induced by a verifier.")
reduce.add_argument("--spec", type=str, required=True)
reduce.add_argument("--input", type=str, default="")
reduce_mode = reduce.add_mutually_exclusive_group(required=True)
reduce_mode.add_argument("--exact", action="store_true", help="Exact construction.")
reduce_mode.add_argument("--learn", action="store_true", help="Hadamard-test learning.")
reduce.add_argument("--eps", type=float, default=0.1)
reduce.add_argument("--delta", type=float, default=0.2)
reduce.add_argument("--round", type=int, default=None, dest="eta", metavar="ETA", help="Quantize estimates to an ETA-bit grid.")
reduce.add_argument("--compare", action="store_true", help="Report per-term error against the exact Hamiltonian.")
reduce.add_argument("--out", type=str, default=None, help="Hamiltonian JSON output path.")
_add_seed(reduce)
_add_report(reduce)

ham = subparsers.add_parser("ham", help="Hamiltonian transformations.")
ham.add_argument("action", choices=["smooth", "kitaev", "sample", "ground"])
ham.add_argument("--in", type=str, required=True, dest="hamiltonian")
ham.add_argument("--l", type=int, default=None, dest="samples")
ham.add_argument("--out", type=str, default=None)
_add_seed(ham)
_add_report(ham)

cldm = subparsers.add_parser("cldm", help="Local density matrix tomography and consistency.")
cldm.add_argument("action", choices=["estimate", "decide", "cover"])
cldm.add_argument("--state", type=str, default=None)
cldm.add_argument("--spec", type=str, default=None, help="MarginalSpec JSON.")
cldm.add_argument("--eps", type=float, default=0.1)
cldm.add_argument("--delta", type=float, default=0.1)
cldm.add_argument("--alpha", type=float, default=0.0)
cldm.add_argument("--num-qubits", type=int, default=1, help="Covering set qubit count.")
cldm.add_argument("--psd-project", action="store_true", help="Clip negative eigenvalues of estimates and renormalize.")
_add_seed(cldm)
_add_report(cldm)

protocol = subparsers.add_parser("protocol", help="Composite verification protocols.")
protocol.add_argument("action", choices=["nonadaptive", "qcma", "ksep", "qma", "strongred"])
protocol.add_argument("--spec", type=str, required=True, help="Verifier spec JSON (Hamiltonian JSON for ksep).")
protocol.add_argument("--input", type=str, default="")
protocol.add_argument("--proof", type=str, default=None, help="Proof or quantum witness state JSON (required for ksep, qma and strongred).")
protocol.add_argument("--witness", type=str, default=None, help="Classical witness JSON (ksep, qma); the honest witness of --proof when omitted.")
protocol.add_argument("--c", type=float, default=2.0 / 3.0)
protocol.add_argument("--s", type=float, default=1.0 / 3.0)
protocol.add_argument("--a", type=float, default=None, help="ksep lower energy threshold.")
protocol.add_argument("--b", type=float, default=None, help="ksep upper energy threshold.")
protocol.add_argument("--k", type=int, default=1, help="Number of registers (ksep).")
protocol.add_argument("--l", type=int, default=5, dest="rounds", help="Sequential runs (strongred).")
protocol.add_argument("--repetition-cap", type=int, default=64)
_add_seed(protocol)
_add_report(protocol)

fixture = subparsers.add_parser("fixture", help="Generate fixture files.")
fixture.add_argument("family", type=FixtureFamily, action=EnumAction)
fixture.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="Family parameter, may be repeated.")
fixture.add_argument("--out", type=str, default=None, help="Output directory.")
_add_seed(fixture)

repro = subparsers.add_parser("repro", help="Run every bundled experiment config.")
repro.add_argument("--out", type=str, default=None, help="Report directory.")

run = subparsers.add_parser("run", help="Run an experiment config (YAML or JSON).")
run.add_argument("--config", type=str, required=True)
_add_report(run)

if qpcp.options.args_parsing:
    args = parser.parse_args()
else:
    args = parser.parse_args([])
