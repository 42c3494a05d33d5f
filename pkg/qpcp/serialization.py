from __future__ import annotations

import json
import os
from typing import Any

import numpy as np

from qpcp.circuits import GateSpec, GateSpecError
from qpcp.linalg import DensityMatrix, DimensionError, StateVector
from qpcp.reduction import HamiltonianTerm, LocalHamiltonian
from qpcp.tomography import MarginalSpec
from qpcp.verifier import AdaptiveVerifier, NonAdaptiveVerifier, VerifierStructureError


class SerializationError(ValueError):
    pass


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SerializationError(f"{where}: missing field '{key}'")
    return obj[key]


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=np.complex128)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]),
            "entries": [[float(z.real), float(z.imag)] for z in m.reshape(-1)]}


def matrix_from_json(obj: dict, where: str = "matrix") -> np.ndarray:
    rows, cols = int(_require(obj, "rows", where)), int(_require(obj, "cols", where))
    entries = _require(obj, "entries", where)
    if len(entries) != rows * cols:
        raise SerializationError(f"{where}: {len(entries)} entries for a {rows}x{cols} matrix")
    try:
        flat = np.array([complex(float(re), float(im)) for re, im in entries], dtype=np.complex128)
    except (TypeError, ValueError) as e:
        raise SerializationError(f"{where}: entries must be [re, im] pairs ({e})")
    return flat.reshape(rows, cols)


def density_to_json(rho: DensityMatrix) -> dict:
    out = matrix_to_json(rho.matrix)
    out["num_qubits"] = rho.num_qubits
    return out


def density_from_json(obj: dict, where: str = "state") -> DensityMatrix:
    try:
        if isinstance(obj, dict) and "amplitudes" in obj:
            amps = np.array([complex(re, im) for re, im in obj["amplitudes"]], dtype=np.complex128)
            return StateVector(int(_require(obj, "num_qubits", where)), amps).density()
        m = matrix_from_json(obj, where)
        n = int(obj.get("num_qubits", int(m.shape[0]).bit_length() - 1))
        return DensityMatrix(n, m)
    except DimensionError as e:
        raise SerializationError(f"{where}: {e}")


def gate_to_json(g: GateSpec) -> dict:
    out: dict[str, Any] = {"targets": list(g.targets)}
    if g.name is not None:
        out["gate"] = g.name
    else:
        out["unitary"] = matrix_to_json(g.unitary)
    if g.controls:
        out["controls"] = list(g.controls)
        out["control_state"] = g.control_state
    return out


def gate_from_json(obj: dict, where: str = "gate") -> GateSpec:
    targets = tuple(_require(obj, "targets", where))
    try:
        return GateSpec(targets, name=obj.get("gate"),
                        unitary=matrix_from_json(obj["unitary"], where) if "unitary" in obj else None,
                        controls=tuple(obj.get("controls", ())), control_state=obj.get("control_state", ""))
    except GateSpecError as e:
        raise SerializationError(f"{where}: {e}")


def _circuit_from_json(gates, where: str) -> tuple[GateSpec, ...]:
    if not isinstance(gates, list):
        raise SerializationError(f"{where}: a circuit is a list of gates")
    return tuple(gate_from_json(g, f"{where}[{i}]") for i, g in enumerate(gates))


def verifier_to_json(v) -> dict:
    out = {"n": v.n, "p1": v.p1, "k": v.k, "p2": v.p2, "q": v.q, "output_qubit": v.output_qubit}
    if isinstance(v, NonAdaptiveVerifier):
        out["kind"] = "nonadaptive"
        out["index_registers"] = [list(r) for r in v.index_registers]
        out["prepare"] = [gate_to_json(g) for g in v.prepare]
        out["decide"] = [gate_to_json(g) for g in v.decide]
    else:
        out["kind"] = "adaptive"
        out["index_register"] = list(v.index_register)
        out["circuits"] = [[gate_to_json(g) for g in c] for c in v.circuits]
    return out


def verifier_from_json(obj: dict, where: str = "verifier"):
    try:
        common = {key: int(_require(obj, key, where)) for key in ("n", "p1", "k", "p2", "q", "output_qubit")}
        kind = obj.get("kind", "adaptive")
        if kind == "nonadaptive":
            return NonAdaptiveVerifier(
                prepare=_circuit_from_json(obj.get("prepare", []), f"{where}.prepare"),
                decide=_circuit_from_json(obj.get("decide", []), f"{where}.decide"),
                index_registers=tuple(tuple(r) for r in _require(obj, "index_registers", where)), **common)
        if kind != "adaptive":
            raise SerializationError(f"{where}: unknown verifier kind '{kind}'")
        circuits = _require(obj, "circuits", where)
        return AdaptiveVerifier(
            circuits=tuple(_circuit_from_json(c, f"{where}.circuits[{t}]") for t, c in enumerate(circuits)),
            index_register=tuple(_require(obj, "index_register", where)), **common)
    except VerifierStructureError as e:
        raise SerializationError(f"{where}: {e}")


def hamiltonian_to_json(h: LocalHamiltonian) -> dict:
    out = {"num_qubits": h.num_qubits, "locality": h.locality,
           "terms": [{"support": list(t.support), "matrix": matrix_to_json(t.matrix)} for t in h.terms]}
    if h.weights is not None:
        out["weights"] = list(h.weights)
    return out


def hamiltonian_from_json(obj: dict, where: str = "hamiltonian") -> LocalHamiltonian:
    try:
        terms = tuple(HamiltonianTerm(tuple(_require(t, "support", f"{where}.terms[{i}]")),
                                      matrix_from_json(_require(t, "matrix", f"{where}.terms[{i}]"), f"{where}.terms[{i}]"))
                      for i, t in enumerate(_require(obj, "terms", where)))
        weights = obj.get("weights")
        return LocalHamiltonian(int(_require(obj, "num_qubits", where)), terms,
                                weights=tuple(weights) if weights is not None else None, locality=obj.get("locality"))
    except SerializationError:
        raise
    except ValueError as e:
        raise SerializationError(f"{where}: {e}")


def marginal_spec_to_json(spec: MarginalSpec) -> dict:
    return {"subsets": [list(s) for s in spec.subsets], "targets": [density_to_json(t) for t in spec.targets]}


def marginal_spec_from_json(obj: dict, where: str = "marginals") -> MarginalSpec:
    subsets = _require(obj, "subsets", where)
    targets = [density_from_json(t, f"{where}.targets[{i}]") for i, t in enumerate(obj.get("targets", []))]
    try:
        return MarginalSpec(tuple(tuple(s) for s in subsets), tuple(targets))
    except DimensionError as e:
        raise SerializationError(f"{where}: {e}")


def witness_to_json(rows) -> dict:
    return {"classical": [[matrix_to_json(r.matrix if isinstance(r, DensityMatrix) else r) for r in row] for row in rows]}


def witness_from_json(obj: dict, where: str = "witness") -> list[list[np.ndarray]]:
    rows = _require(obj, "classical", where)
    return [[matrix_from_json(m, f"{where}.classical[{i}][{j}]") for j, m in enumerate(row)] for i, row in enumerate(rows)]


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def write_json(path: str, obj) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(obj))
        f.write("\n")


def read_json(path: str):
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise SerializationError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}")
