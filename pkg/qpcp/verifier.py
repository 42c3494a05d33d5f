from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from qpcp.circuits import (GateSpec, apply_circuit, project_qubits, register_probabilities, slot_index,
                           to_batch, to_columns, x_gates)
from qpcp.linalg import DensityMatrix, DimensionError, check_qubit_cap
from qpcp.rng import RandomStream
from qpcp.utils import ceil_int

PRUNE_TOLERANCE = 1e-12


class VerifierStructureError(ValueError):
    pass


class MalformedPathError(ValueError):
    pass


def index_register_size(num_proof_qubits: int) -> int:
    """ceil(log2(k*p2)) qubits address one proof qubit."""
    return max(num_proof_qubits - 1, 0).bit_length()


@dataclass(frozen=True)
class QueryPath:
    indices: tuple[int, ...]
    probability: float

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if len(set(self.indices)) != len(self.indices):
            raise MalformedPathError(f"query path {self.indices} repeats an index")
        if not -1e-9 <= self.probability <= 1 + 1e-9:
            raise MalformedPathError(f"path probability {self.probability} outside [0, 1]")
        object.__setattr__(self, "probability", min(max(float(self.probability), 0.0), 1.0))


@dataclass(frozen=True)
class Step:
    circuit: tuple[GateSpec, ...]
    register: tuple[int, ...]


class _VerifierBase:
    n: int
    p1: int
    k: int
    p2: int
    q: int
    output_qubit: int

    @property
    def num_proof_qubits(self) -> int:
        return self.k * self.p2

    @property
    def num_qubits(self) -> int:
        return self.n + self.p1 + self.k * self.p2

    @property
    def proof_offset(self) -> int:
        return self.n + self.p1

    def proof_index(self, prover: int, position: int) -> int:
        """(j, l) -> (j-1)*p2 + l with 1-based prover j and 0-based position l."""
        if not 1 <= prover <= self.k or not 0 <= position < self.p2:
            raise MalformedPathError(f"no proof qubit ({prover}, {position}) for k={self.k}, p2={self.p2}")
        return (prover - 1) * self.p2 + position

    def steps(self) -> list[Step]:
        raise NotImplementedError

    def final_circuit(self) -> tuple[GateSpec, ...]:
        raise NotImplementedError

    def _circuit_slot_limits(self) -> list[tuple[str, Sequence[GateSpec], int]]:
        raise NotImplementedError

    def _validate(self):
        for name in ("n", "p1", "k", "p2", "q"):
            if getattr(self, name) < 0:
                raise VerifierStructureError(f"{name} must be nonnegative")
        if self.q < 1 or self.q > self.num_proof_qubits:
            raise VerifierStructureError(f"q={self.q} queries on {self.num_proof_qubits} proof qubits")
        check_qubit_cap(self.num_qubits)
        if not 0 <= self.output_qubit < self.proof_offset:
            raise VerifierStructureError(f"output qubit {self.output_qubit} is not in registers A or B")
        size = index_register_size(self.num_proof_qubits)
        for step in self.steps():
            if len(step.register) != size:
                raise VerifierStructureError(f"index register {step.register} must have {size} qubits")
            for r in step.register:
                if not self.n <= r < self.proof_offset:
                    raise VerifierStructureError(f"index register qubit {r} is not an ancilla")
        for label, circuit, limit in self._circuit_slot_limits():
            for gate in circuit:
                for t in gate.qubits:
                    s = slot_index(t)
                    if s is None and t >= self.proof_offset:
                        raise VerifierStructureError(f"{label} addresses proof qubit {t} directly; use a query slot")
                    if s is not None and s > limit:
                        raise VerifierStructureError(f"{label} uses slot q{s} before it was queried")

    def resolve(self, circuit: Sequence[GateSpec], prefix: Sequence[int]) -> list[GateSpec]:
        offset = self.proof_offset
        return [g.resolve(lambda s: offset + prefix[s - 1]) for g in circuit]

    def step_circuit(self, t: int, prefix: Sequence[int], x: str) -> list[GateSpec]:
        gates = self.resolve(self.steps()[t].circuit, prefix)
        if t == 0:
            gates = x_gates(x) + gates
        return gates

    def check_input(self, x: str) -> None:
        if len(x) != self.n or any(b not in "01" for b in x):
            raise ValueError(f"input '{x}' is not an {self.n}-bit string")

    def check_path(self, path: Sequence[int]) -> tuple[int, ...]:
        path = tuple(int(i) for i in path)
        if len(path) != self.q:
            raise MalformedPathError(f"path {path} has length {len(path)}, expected {self.q}")
        if len(set(path)) != len(path):
            raise MalformedPathError(f"path {path} repeats an index")
        if any(i < 0 or i >= self.num_proof_qubits for i in path):
            raise MalformedPathError(f"path {path} leaves the proof register")
        return path


@dataclass(frozen=True)
class AdaptiveVerifier(_VerifierBase):
    n: int
    p1: int
    k: int
    p2: int
    q: int
    circuits: tuple[tuple[GateSpec, ...], ...]
    index_register: tuple[int, ...]
    output_qubit: int

    def __post_init__(self):
        object.__setattr__(self, "circuits", tuple(tuple(c) for c in self.circuits))
        object.__setattr__(self, "index_register", tuple(self.index_register))
        if len(self.circuits) != self.q + 1:
            raise VerifierStructureError(f"{len(self.circuits)} circuits for q={self.q}, expected q+1")
        self._validate()

    @property
    def adaptive(self) -> bool:
        return True

    def steps(self) -> list[Step]:
        return [Step(self.circuits[t], self.index_register) for t in range(self.q)]

    def final_circuit(self) -> tuple[GateSpec, ...]:
        return self.circuits[self.q]

    def _circuit_slot_limits(self):
        return [(f"circuit {t + 1}", c, t) for t, c in enumerate(self.circuits)]


@dataclass(frozen=True)
class NonAdaptiveVerifier(_VerifierBase):
    """One PVM over q-tuples: `prepare` runs on A and B only, the q index registers are
    read together, then `decide` acts on the selected proof qubits."""
    n: int
    p1: int
    k: int
    p2: int
    q: int
    prepare: tuple[GateSpec, ...]
    decide: tuple[GateSpec, ...]
    index_registers: tuple[tuple[int, ...], ...]
    output_qubit: int

    def __post_init__(self):
        object.__setattr__(self, "prepare", tuple(self.prepare))
        object.__setattr__(self, "decide", tuple(self.decide))
        object.__setattr__(self, "index_registers", tuple(tuple(r) for r in self.index_registers))
        if len(self.index_registers) != self.q:
            raise VerifierStructureError(f"{len(self.index_registers)} index registers for q={self.q}")
        used = [r for reg in self.index_registers for r in reg]
        if len(set(used)) != len(used):
            raise VerifierStructureError("index registers overlap")
        self._validate()

    @property
    def adaptive(self) -> bool:
        return False

    def steps(self) -> list[Step]:
        # the joint PVM is the product of commuting projectors on disjoint registers
        return [Step(self.prepare if t == 0 else (), reg) for t, reg in enumerate(self.index_registers)]

    def final_circuit(self) -> tuple[GateSpec, ...]:
        return self.decide

    def _circuit_slot_limits(self):
        return [("prepare circuit", self.prepare, 0), ("decide circuit", self.decide, self.q)]


@dataclass(frozen=True)
class RepeatedVerifier:
    """R independent runs of `base` on R proof copies; accepts when at least
    threshold*R runs accept."""
    base: Union[AdaptiveVerifier, NonAdaptiveVerifier]
    repetitions: int
    threshold: float

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetition count must be at least 1")
        if not 0 < self.threshold <= 1:
            raise ValueError(f"threshold {self.threshold} not in (0, 1]")

    @property
    def q(self) -> int:
        return self.base.q * self.repetitions

    @property
    def adaptive(self) -> bool:
        return self.base.adaptive

    @property
    def required_accepts(self) -> int:
        return ceil_int(self.threshold * self.repetitions)

    def acceptance(self, copy_probabilities: Sequence[float]) -> float:
        """Pr[#accepts >= threshold*R] for independent copies (Poisson-binomial tail)."""
        dist = np.zeros(self.repetitions + 1)
        dist[0] = 1.0
        for p in copy_probabilities:
            dist[1:] = dist[1:] * (1 - p) + dist[:-1] * p
            dist[0] *= 1 - p
        return float(np.clip(dist[self.required_accepts:].sum(), 0.0, 1.0))


AnyVerifier = Union[AdaptiveVerifier, NonAdaptiveVerifier]


def initial_batch(v: AnyVerifier, xi: DensityMatrix) -> np.ndarray:
    """|0...0>_{AB} (x) sqrt(w_k)|v_k>_C for the eigen-decomposition of xi, as a column batch."""
    if xi.num_qubits != v.num_proof_qubits:
        raise DimensionError(f"proof has {xi.num_qubits} qubits, verifier reads {v.num_proof_qubits}")
    w, vecs = xi.components()
    cols = vecs * np.sqrt(w)
    full = np.zeros((1 << v.num_qubits, cols.shape[1]), dtype=np.complex128)
    full[:cols.shape[0], :] = cols
    return to_batch(full, v.num_qubits)


def _explore(v: AnyVerifier, x: str, batch: np.ndarray, t: int, prefix: tuple, leaves: list):
    if t == v.q:
        leaves.append((prefix, apply_circuit(batch, v.resolve(v.final_circuit(), prefix))))
        return
    step = v.steps()[t]
    batch = apply_circuit(batch, v.step_circuit(t, prefix, x))
    weights = register_probabilities(batch, step.register)
    for value, p in enumerate(weights):
        if p < PRUNE_TOLERANCE:
            if p > 0:
                logging.debug(f"pruning branch {prefix + (value,)} with weight {p:.3e}")
            continue
        if value >= v.num_proof_qubits or value in prefix:
            raise VerifierStructureError(f"query {t + 1} returns index {value} after {prefix} with probability {p:.3e}")
        _explore(v, x, project_qubits(batch, step.register, value), t + 1, prefix + (value,), leaves)


def branch_leaves(v: AnyVerifier, x: str, batch: np.ndarray) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """Every query path with non-negligible weight and the (unnormalized) batch after the final circuit."""
    v.check_input(x)
    leaves = []
    _explore(v, x, batch, 0, (), leaves)
    return leaves


def outcome_branches(v: AnyVerifier, x: str, xi: DensityMatrix) -> list[tuple[tuple[int, ...], int, float]]:
    """(path, output bit, probability) for every full outcome branch."""
    out = []
    for path, batch in branch_leaves(v, x, initial_batch(v, xi)):
        reject, accept = register_probabilities(batch, [v.output_qubit])
        out.append((path, 0, float(reject)))
        out.append((path, 1, float(accept)))
    return out


def path_distribution(v: AnyVerifier, x: str, xi: DensityMatrix) -> dict[tuple[int, ...], float]:
    dist = {}
    for path, bit, p in outcome_branches(v, x, xi):
        dist[path] = dist.get(path, 0.0) + p
    return dist


def accept_probability_exact(v, x: str, xi) -> float:
    if isinstance(v, RepeatedVerifier):
        proofs = [xi] * v.repetitions if isinstance(xi, DensityMatrix) else list(xi)
        if len(proofs) != v.repetitions:
            raise DimensionError(f"{len(proofs)} proof copies for {v.repetitions} repetitions")
        return v.acceptance([accept_probability_exact(v.base, x, p) for p in proofs])
    total = sum(p for _, bit, p in outcome_branches(v, x, xi) if bit == 1)
    return float(min(max(total, 0.0), 1.0))


def accept_operator(v: AnyVerifier, x: str) -> np.ndarray:
    """Proof-space POVM element A with Pr[accept | xi] = tr(A xi)."""
    d = 1 << v.num_proof_qubits
    batch = np.zeros((1 << v.num_qubits, d), dtype=np.complex128)
    batch[:d, :] = np.eye(d) / np.sqrt(d)
    op = np.zeros((d, d), dtype=np.complex128)
    for _, leaf in branch_leaves(v, x, to_batch(batch, v.num_qubits)):
        k = to_columns(project_qubits(leaf, [v.output_qubit], 1))
        op += d * (k.conj().T @ k)
    return (op + op.conj().T) / 2


def sample_run(v, x: str, xi, rng: RandomStream) -> tuple[QueryPath, int]:
    """One Monte-Carlo run: every PVM outcome is drawn from its exact conditional distribution."""
    if isinstance(v, RepeatedVerifier):
        proofs = [xi] * v.repetitions if isinstance(xi, DensityMatrix) else list(xi)
        indices, probability, accepts = [], 1.0, 0
        for r, proof in enumerate(proofs):
            path, bit = sample_run(v.base, x, proof, rng.child(f"copy={r}"))
            indices += [r * v.base.num_proof_qubits + i for i in path.indices]
            probability *= path.probability
            accepts += bit
        return QueryPath(tuple(indices), probability), int(accepts >= v.required_accepts)

    v.check_input(x)
    gen = rng.generator
    batch = initial_batch(v, xi)
    prefix = ()
    for t, step in enumerate(v.steps()):
        batch = apply_circuit(batch, v.step_circuit(t, prefix, x))
        weights = register_probabilities(batch, step.register)
        weights = np.where(weights < PRUNE_TOLERANCE, 0.0, weights)
        value = int(gen.choice(len(weights), p=weights / weights.sum()))
        if value >= v.num_proof_qubits or value in prefix:
            raise VerifierStructureError(f"query {t + 1} returned index {value} after {prefix}")
        batch = project_qubits(batch, step.register, value)
        prefix = prefix + (value,)
    batch = apply_circuit(batch, v.resolve(v.final_circuit(), prefix))
    reject, accept = register_probabilities(batch, [v.output_qubit])
    weight = reject + accept
    bit = int(gen.random() < accept / weight)
    return QueryPath(prefix, weight), bit


def evolve_path(v: AnyVerifier, x: str, path: Sequence[int], batch: np.ndarray) -> np.ndarray:
    """Pi_0^{out} V^{q+1} M_q ... M_1 applied to a batch, with M_t = Pi_{i_t} V^t."""
    v.check_input(x)
    path = v.check_path(path)
    for t, step in enumerate(v.steps()):
        batch = apply_circuit(batch, v.step_circuit(t, path[:t], x))
        batch = project_qubits(batch, step.register, path[t])
    batch = apply_circuit(batch, v.resolve(v.final_circuit(), path))
    return project_qubits(batch, [v.output_qubit], 0)


def path_operator(v: AnyVerifier, x: str, path: Sequence[int]) -> np.ndarray:
    """Full-space P = M_1^dag ... M_q^dag V^dag Pi_0 V M_q ... M_1 for one ordered path."""
    dim = 1 << v.num_qubits
    k = to_columns(evolve_path(v, x, path, to_batch(np.eye(dim, dtype=np.complex128), v.num_qubits)))
    return k.conj().T @ k


def repetition_count(c: float, s: float, t: float) -> int:
    """R = ceil(2 t ln 2 / (c - s)^2) runs push the error to 2^-t."""
    if c <= s:
        raise ValueError(f"completeness {c} must exceed soundness {s}")
    if t <= 0:
        raise ValueError("t must be positive")
    return ceil_int(2 * t * math.log(2) / (c - s) ** 2)


def parallel_repeat(v: AnyVerifier, repetitions: int, threshold: float) -> RepeatedVerifier:
    return RepeatedVerifier(v, repetitions, threshold)
