import hashlib

from qpcp import serialization
from qpcp.cli_args import args, HashFunction


def hasher():
    hashfuncs = {
        HashFunction.MD5: hashlib.md5,
        HashFunction.SHA1: hashlib.sha1,
        HashFunction.SHA256: hashlib.sha256,
        HashFunction.SHA512: hashlib.sha512
    }
    return hashfuncs[HashFunction(args.default_hashing_function)]


def body_digest(body) -> str:
    """Digest of the canonical (sorted-key) JSON text of a report body."""
    h = hasher()()
    h.update(serialization.dumps(body).encode("utf-8"))
    return h.hexdigest()


def check(passed, **values) -> dict:
    out = dict(values)
    out["passed"] = bool(passed)
    return out


def failed_checks(outputs: dict) -> list[str]:
    """Node ids whose report carries "passed": false."""
    return sorted(node_id for node_id, report in outputs.items()
                  if isinstance(report, dict) and report.get("passed") is False)
