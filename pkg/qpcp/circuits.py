from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from qpcp.linalg import as_matrix

UNITARY_TOLERANCE = 1e-9

_S2 = 1 / np.sqrt(2)

NAMED_GATES = {
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "S": np.array([[1, 0], [0, 1j]], dtype=np.complex128),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=np.complex128),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128),
    "CZ": np.diag([1, 1, 1, -1]).astype(np.complex128),
}

SELF_ADJOINT = {"H", "X", "Y", "Z", "CNOT", "CZ"}

Target = Union[int, str]


class GateSpecError(ValueError):
    pass


def slot_index(target: Target) -> int | None:
    """'q3' -> 3 (the proof qubit selected by the third query); plain integers -> None."""
    if isinstance(target, str):
        if len(target) < 2 or target[0] != "q" or not target[1:].isdigit() or int(target[1:]) < 1:
            raise GateSpecError(f"bad slot target '{target}'")
        return int(target[1:])
    return None


@dataclass(frozen=True)
class GateSpec:
    targets: tuple[Target, ...]
    name: str | None = None
    unitary: np.ndarray | None = field(default=None, compare=False)
    controls: tuple[Target, ...] = ()
    control_state: str = ""

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "controls", tuple(self.controls))
        for t in self.targets + self.controls:
            if not isinstance(t, str) and (not isinstance(t, (int, np.integer)) or t < 0):
                raise GateSpecError(f"bad target {t!r}")
            slot_index(t)
        if len(set(self.targets + self.controls)) != len(self.targets) + len(self.controls):
            raise GateSpecError(f"repeated qubit in gate targets {self.targets} / controls {self.controls}")
        if (self.name is None) == (self.unitary is None):
            raise GateSpecError("a gate needs exactly one of a name or a unitary")
        if self.name is not None:
            if self.name not in NAMED_GATES:
                raise GateSpecError(f"unknown gate '{self.name}'")
            arity = 1 if NAMED_GATES[self.name].shape[0] == 2 else 2
            if len(self.targets) != arity:
                raise GateSpecError(f"gate {self.name} acts on {arity} qubit(s), got targets {self.targets}")
        else:
            u = as_matrix(self.unitary)
            dim = 1 << len(self.targets)
            if u.shape != (dim, dim):
                raise GateSpecError(f"unitary of shape {u.shape} on {len(self.targets)} targets")
            if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > UNITARY_TOLERANCE:
                raise GateSpecError("matrix is not unitary within 1e-9")
            u.setflags(write=False)
            object.__setattr__(self, "unitary", u)
        if not self.control_state:
            object.__setattr__(self, "control_state", "1" * len(self.controls))
        if len(self.control_state) != len(self.controls) or any(c not in "01" for c in self.control_state):
            raise GateSpecError(f"control state '{self.control_state}' does not match controls {self.controls}")

    @property
    def matrix(self) -> np.ndarray:
        if self.name is not None:
            return NAMED_GATES[self.name]
        return self.unitary

    @property
    def qubits(self) -> tuple[Target, ...]:
        return self.controls + self.targets

    @property
    def slots(self) -> set[int]:
        return {s for s in (slot_index(t) for t in self.qubits) if s is not None}

    def full_matrix(self) -> np.ndarray:
        """Matrix on controls + targets (controls most significant)."""
        u = self.matrix
        if not self.controls:
            return u
        k = u.shape[0]
        m = np.eye(k << len(self.controls), dtype=np.complex128)
        c = int(self.control_state, 2)
        m[c * k:(c + 1) * k, c * k:(c + 1) * k] = u
        return m

    def resolve(self, slot_map: Callable[[int], int]) -> GateSpec:
        def r(t):
            s = slot_index(t)
            return t if s is None else slot_map(s)
        return GateSpec(tuple(r(t) for t in self.targets), name=self.name, unitary=self.unitary,
                        controls=tuple(r(t) for t in self.controls), control_state=self.control_state)

    def adjoint(self) -> GateSpec:
        if self.name in SELF_ADJOINT:
            return self
        return GateSpec(self.targets, unitary=self.matrix.conj().T, controls=self.controls, control_state=self.control_state)


Circuit = Sequence[GateSpec]


def adjoint_circuit(circuit: Circuit) -> list[GateSpec]:
    return [g.adjoint() for g in reversed(circuit)]


def x_gates(bits: str, offset: int = 0) -> list[GateSpec]:
    return [GateSpec((offset + i,), name="X") for i, b in enumerate(bits) if b == "1"]


def zero_batch(num_qubits: int, count: int = 1) -> np.ndarray:
    state = np.zeros((1 << num_qubits, count), dtype=np.complex128)
    state[0, :] = 1.0
    return state.reshape((2,) * num_qubits + (count,))


def to_batch(columns: np.ndarray, num_qubits: int) -> np.ndarray:
    columns = np.asarray(columns, dtype=np.complex128)
    if columns.ndim == 1:
        columns = columns[:, None]
    return columns.reshape((2,) * num_qubits + (columns.shape[-1],))


def to_columns(batch: np.ndarray) -> np.ndarray:
    return batch.reshape(-1, batch.shape[-1])


def apply_matrix(batch: np.ndarray, matrix: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to the listed qubits of a batch of state vectors.

    The batch has shape (2,)*N + (r,); the last axis indexes the r columns."""
    k = len(qubits)
    if k == 0:
        return batch * matrix[0, 0]
    op = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(op, batch, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


def apply_gate(batch: np.ndarray, gate: GateSpec) -> np.ndarray:
    if gate.slots:
        raise GateSpecError(f"gate on {gate.qubits} has unresolved query-slot targets")
    return apply_matrix(batch, gate.full_matrix(), [int(q) for q in gate.qubits])


def apply_circuit(batch: np.ndarray, circuit: Circuit) -> np.ndarray:
    for gate in circuit:
        batch = apply_gate(batch, gate)
    return batch


def circuit_unitary(circuit: Circuit, num_qubits: int) -> np.ndarray:
    dim = 1 << num_qubits
    batch = to_batch(np.eye(dim, dtype=np.complex128), num_qubits)
    return to_columns(apply_circuit(batch, circuit))


def project_qubits(batch: np.ndarray, qubits: Sequence[int], value: int) -> np.ndarray:
    """Keep only the amplitudes where the listed qubits (MSB first) read `value`."""
    if not qubits:
        return batch
    index = [slice(None)] * batch.ndim
    for pos, q in enumerate(qubits):
        index[q] = (value >> (len(qubits) - 1 - pos)) & 1
    index = tuple(index)
    out = np.zeros_like(batch)
    out[index] = batch[index]
    return out


def register_probabilities(batch: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Unnormalized outcome weights sum |amp|^2 for every value of the register."""
    if not qubits:
        return np.array([float(np.sum(np.abs(batch) ** 2))])
    moved = np.moveaxis(batch, list(qubits), list(range(len(qubits))))
    moved = moved.reshape(1 << len(qubits), -1)
    return np.sum(np.abs(moved) ** 2, axis=1)
