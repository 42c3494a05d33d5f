from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from qpcp.cli_args import args

HERMITIAN_TOLERANCE = 1e-8
STATE_TOLERANCE = 1e-10

MAX_QUBITS = args.max_qubits


class DimensionError(ValueError):
    pass


class QubitCapExceeded(ValueError):
    pass


def set_max_qubits(num_qubits: int) -> None:
    global MAX_QUBITS
    MAX_QUBITS = num_qubits


def get_max_qubits() -> int:
    return MAX_QUBITS


def check_qubit_cap(num_qubits: int) -> None:
    if num_qubits > MAX_QUBITS:
        raise QubitCapExceeded(f"{num_qubits} qubits requested, cap is {MAX_QUBITS} (QPCP_MAX_QUBITS)")


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got an array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DimensionError("matrix has non-finite entries")
    return m


def num_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOLERANCE) -> bool:
    return a.shape[0] == a.shape[1] and bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


@dataclass(frozen=True)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << self.num_qubits:
            raise DimensionError(f"state vector of length {amps.shape[0]} for {self.num_qubits} qubits")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > STATE_TOLERANCE:
            raise DimensionError(f"state vector norm^2 is {norm}, expected 1")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, bits: str) -> StateVector:
        amps = np.zeros(1 << len(bits), dtype=np.complex128)
        amps[int(bits, 2) if bits else 0] = 1.0
        return cls(len(bits), amps)

    def density(self) -> DensityMatrix:
        return DensityMatrix(self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        dim = 1 << self.num_qubits
        if m.shape != (dim, dim):
            raise DimensionError(f"density matrix of shape {m.shape} for {self.num_qubits} qubits")
        if not is_hermitian(m, STATE_TOLERANCE):
            raise DimensionError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOLERANCE:
            raise DimensionError(f"density matrix has trace {tr}")
        m = hermitize(m)
        if scipy.linalg.eigh(m, eigvals_only=True)[0] < -STATE_TOLERANCE:
            raise DimensionError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def basis(cls, bits: str) -> DensityMatrix:
        return StateVector.basis(bits).density()

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> DensityMatrix:
        dim = 1 << num_qubits
        return cls(num_qubits, np.eye(dim, dtype=np.complex128) / dim)

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def components(self, cutoff: float = 1e-15) -> tuple[np.ndarray, np.ndarray]:
        """Eigen-decomposition rho = sum_k w_k |v_k><v_k| restricted to w_k > cutoff."""
        w, v = scipy.linalg.eigh(self.matrix)
        keep = w > cutoff
        return w[keep], v[:, keep]


@dataclass(frozen=True)
class PauliWord:
    letters: str

    def __post_init__(self):
        if any(c not in "IXYZ" for c in self.letters):
            raise ValueError(f"invalid Pauli word '{self.letters}'")

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.letters) if c != "I")

    def __str__(self):
        return self.letters


PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    return functools.reduce(kron, mats, np.ones((1, 1), dtype=np.complex128))


def pauli_matrix(w: PauliWord) -> np.ndarray:
    return kron_all(PAULI[c] for c in w.letters)


def partial_trace_matrix(matrix: np.ndarray, num_qubits: int, keep: Iterable[int]) -> np.ndarray:
    """Trace out every qubit not in keep; kept qubits come out in ascending order.

    Works on any square operator (not only normalized states)."""
    keep = sorted(set(keep))
    for q in keep:
        if q < 0 or q >= num_qubits:
            raise DimensionError(f"qubit {q} out of range for {num_qubits} qubits")
    tensor = np.asarray(matrix).reshape((2,) * (2 * num_qubits))
    rows = list(range(num_qubits))
    cols = [num_qubits + i if i in keep else i for i in range(num_qubits)]
    out = keep + [num_qubits + i for i in keep]
    reduced = np.einsum(tensor, rows + cols, out)
    dim = 1 << len(keep)
    return reduced.reshape(dim, dim)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = sorted(set(keep))
    return DensityMatrix(len(keep), partial_trace_matrix(rho.matrix, rho.num_qubits, keep))


def embed_operator(op: np.ndarray, support: Sequence[int], num_qubits: int) -> np.ndarray:
    """Lift an operator on the qubits in support (listed order) to the full register."""
    k = len(support)
    if op.shape != (1 << k, 1 << k):
        raise DimensionError(f"operator of shape {op.shape} on {k} qubits")
    if len(set(support)) != k or any(q < 0 or q >= num_qubits for q in support):
        raise DimensionError(f"bad support {tuple(support)} for {num_qubits} qubits")
    rest = [q for q in range(num_qubits) if q not in support]
    full = np.kron(op, np.eye(1 << len(rest), dtype=np.complex128))
    order = list(support) + rest
    perm = list(np.argsort(order))
    tensor = full.reshape((2,) * (2 * num_qubits))
    tensor = tensor.transpose(perm + [num_qubits + p for p in perm])
    dim = 1 << num_qubits
    return tensor.reshape(dim, dim)


def operator_norm(a) -> float:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"operator norm of non-square {a.shape} matrix")
    if a.size == 0:
        return 0.0
    return float(scipy.linalg.svdvals(a)[0])


def trace_norm(a) -> float:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"trace norm of non-square {a.shape} matrix")
    return float(np.sum(scipy.linalg.svdvals(a)))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.num_qubits != sigma.num_qubits:
        raise DimensionError(f"trace distance between {rho.num_qubits}- and {sigma.num_qubits}-qubit states")
    diff = hermitize(rho.matrix - sigma.matrix)
    return float(0.5 * np.sum(np.abs(scipy.linalg.eigh(diff, eigvals_only=True))))


def eigh_hermitian(h) -> tuple[np.ndarray, np.ndarray]:
    h = as_matrix(h)
    if not is_hermitian(h):
        raise DimensionError("matrix is not Hermitian within 1e-8")
    return scipy.linalg.eigh(hermitize(h))


def min_eigenvalue(h) -> float:
    h = as_matrix(h)
    if not is_hermitian(h):
        raise DimensionError("matrix is not Hermitian within 1e-8")
    return float(scipy.linalg.eigh(hermitize(h), eigvals_only=True)[0])


def psd_project(matrix: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalize to unit trace."""
    w, v = scipy.linalg.eigh(hermitize(as_matrix(matrix)))
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        logging.warning("psd_project: no positive spectrum left, returning the maximally mixed state")
        return np.eye(matrix.shape[0], dtype=np.complex128) / matrix.shape[0]
    w = w / w.sum()
    return (v * w) @ v.conj().T


def haar_state(dim: int, gen: np.random.Generator) -> np.ndarray:
    v = gen.normal(size=dim) + 1j * gen.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density_matrix(num_qubits: int, gen: np.random.Generator, env_qubits: int | None = None) -> DensityMatrix:
    """Partial trace of a Haar-random pure state on system + environment."""
    if env_qubits is None:
        env_qubits = num_qubits
    dim, env = 1 << num_qubits, 1 << env_qubits
    psi = haar_state(dim * env, gen).reshape(dim, env)
    rho = psi @ psi.conj().T
    return DensityMatrix(num_qubits, hermitize(rho / np.trace(rho).real))


def random_pure_density(num_qubits: int, gen: np.random.Generator) -> DensityMatrix:
    return StateVector(num_qubits, haar_state(1 << num_qubits, gen)).density()


def random_unitary(dim: int, gen: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * gen.random()) * np.ones((1, 1), dtype=np.complex128)
    return np.asarray(unitary_group.rvs(dim, random_state=gen), dtype=np.complex128)


def random_hermitian(dim: int, gen: np.random.Generator) -> np.ndarray:
    a = gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_psd(dim: int, gen: np.random.Generator, norm: float = 1.0) -> np.ndarray:
    """Random PSD matrix with operator norm exactly `norm`."""
    a = gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))
    p = a @ a.conj().T
    return hermitize(p * (norm / operator_norm(p)))


def complete_unitary(column: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """A unitary whose first column is the given unit vector, other columns random."""
    column = np.asarray(column, dtype=np.complex128)
    dim = column.shape[0]
    m = gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))
    m[:, 0] = column
    q, r = np.linalg.qr(m)
    phase = r[0, 0] / abs(r[0, 0])
    q[:, 0] *= phase
    return q
