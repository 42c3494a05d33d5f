from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qpcp.linalg import (DensityMatrix, DimensionError, PauliWord, hermitize, partial_trace_matrix,
                         pauli_matrix, random_density_matrix, trace_distance, trace_norm)
from qpcp.rng import as_stream
from qpcp.utils import ProgressBar

DECISION_SLACK = 1e-12


def pauli_words(num_qubits: int) -> list[PauliWord]:
    return [PauliWord("".join(p)) for p in itertools.product("IXYZ", repeat=num_qubits)]


@dataclass(frozen=True)
class MarginalSpec:
    subsets: tuple[tuple[int, ...], ...]
    targets: tuple[DensityMatrix, ...] = ()

    def __post_init__(self):
        subsets = tuple(tuple(sorted(set(int(i) for i in s))) for s in self.subsets)
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.targets:
            if len(self.targets) != len(subsets):
                raise DimensionError(f"{len(self.targets)} targets for {len(subsets)} subsets")
            for s, t in zip(subsets, self.targets):
                if t.num_qubits != len(s):
                    raise DimensionError(f"{t.num_qubits}-qubit target for subset {s}")


def pauli_expectation(rho: DensityMatrix, w: PauliWord, shots: int, rng) -> float:
    """Mean of +-1 outcomes of the measurement {(I+P)/2, (I-P)/2}."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    if w.num_qubits != rho.num_qubits:
        raise DimensionError(f"{w.num_qubits}-qubit word on a {rho.num_qubits}-qubit state")
    p_plus = float(np.real(np.trace(pauli_matrix(w) @ rho.matrix)) + 1) / 2
    p_plus = min(max(p_plus, 0.0), 1.0)
    plus = as_stream(rng).generator.binomial(shots, p_plus)
    return 2 * plus / shots - 1


def marginal_shot_count(d: int, m: int, eps: float, delta: float) -> int:
    """Shots per coefficient: accuracy eps/d^2 at confidence 1 - delta/(m d^2)."""
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ValueError(f"eps={eps}, delta={delta} must lie in (0, 1)")
    accuracy = eps / d ** 2
    return int(math.ceil(2 * math.log(2 * m * d ** 2 / delta) / accuracy ** 2))


def reconstruct_from_coefficients(coefficients: Sequence[float], num_qubits: int) -> np.ndarray:
    """rho = (1/d) sum_j c_j P_j over pauli_words(num_qubits)."""
    words = pauli_words(num_qubits)
    if len(coefficients) != len(words):
        raise DimensionError(f"{len(coefficients)} coefficients for {len(words)} Pauli words")
    d = 1 << num_qubits
    out = np.zeros((d, d), dtype=np.complex128)
    for c, w in zip(coefficients, words):
        out += c * pauli_matrix(w)
    return hermitize(out / d)


def estimate_marginals(rho: DensityMatrix, subsets: Sequence[Sequence[int]], eps: float, delta: float, rng) -> list[np.ndarray]:
    """Raw Pauli-tomography estimates of every marginal.

    Estimates are Hermitian with unit trace but may fail to be PSD."""
    stream = as_stream(rng)
    subsets = [tuple(sorted(set(s))) for s in subsets]
    m = len(subsets)
    estimates = []
    with ProgressBar(m, desc="marginals") as pbar:
        for i, subset in enumerate(subsets):
            d = 1 << len(subset)
            shots = marginal_shot_count(d, m, eps, delta)
            logging.debug(f"marginal {subset}: {d * d - 1} coefficients, {shots} shots each")
            marginal = DensityMatrix(len(subset), partial_trace_matrix(rho.matrix, rho.num_qubits, subset))
            coefficients = []
            for w in pauli_words(len(subset)):
                if not w.support:
                    coefficients.append(1.0)
                    continue
                coefficients.append(pauli_expectation(marginal, w, shots, stream.child(f"marginal={i}/word={w}")))
            estimates.append(reconstruct_from_coefficients(coefficients, len(subset)))
            pbar.update(1)
    return estimates


def cldm_distances(estimates: Sequence[np.ndarray], targets: Sequence[DensityMatrix]) -> list[float]:
    if len(estimates) != len(targets):
        raise DimensionError(f"{len(estimates)} estimates for {len(targets)} targets")
    out = []
    for est, tgt in zip(estimates, targets):
        est = np.asarray(est)
        tgt = tgt.matrix if isinstance(tgt, DensityMatrix) else np.asarray(tgt)
        if est.shape != tgt.shape:
            raise DimensionError(f"estimate of shape {est.shape} against target of shape {tgt.shape}")
        out.append(trace_norm(est - tgt))
    return out


def cldm_decide(estimates: Sequence[np.ndarray], targets: Sequence[DensityMatrix], alpha: float, eps: float) -> bool:
    """Accept iff every ||rho~_i - rho_i||_1 <= alpha + eps (full trace norm)."""
    return max(cldm_distances(estimates, targets), default=0.0) <= alpha + eps + DECISION_SLACK


def cldm_copy_count(m: int, q: int, eps: float, delta: float, n: int, constant: float = 16) -> tuple[int, float]:
    """(l, k): copies for the marginal estimates and the symmetrization size of the consistency protocol."""
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ValueError(f"eps={eps}, delta={delta} must lie in (0, 1)")
    l = int(math.ceil(constant * m * q * 16 ** q * math.log(m / delta) / eps ** 2))
    k = (2 * l * delta ** 2 + l ** 2 * n * math.log(2)) / (2 * delta ** 2)
    return l, k


@dataclass(frozen=True)
class CoveringSet:
    num_qubits: int
    epsilon: float
    members: tuple[DensityMatrix, ...]

    @property
    def dimension(self) -> int:
        return 1 << self.num_qubits

    def stacked(self) -> np.ndarray:
        return np.stack([m.matrix for m in self.members])


def _distances(stack: np.ndarray, rho: np.ndarray) -> np.ndarray:
    diff = stack - rho[None, :, :]
    diff = (diff + np.conj(np.swapaxes(diff, 1, 2))) / 2
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff)), axis=1)


def build_covering_set(num_qubits: int, eps: float, rng, patience: int = 10 ** 4,
                       insertion_ratio: float = 1.0) -> CoveringSet:
    """Greedy eps-net: keep a purification sample when it is farther than insertion_ratio*eps from
    every member; stop after `patience` consecutive rejections."""
    if num_qubits > 2:
        raise DimensionError(f"covering sets are built for d <= 4, got {num_qubits} qubits")
    if eps <= 0:
        raise ValueError("eps must be positive")
    gen = as_stream(rng).generator
    members: list[DensityMatrix] = []
    stack = None
    misses = 0
    draws = 0
    while misses < patience:
        sample = random_density_matrix(num_qubits, gen)
        draws += 1
        if stack is None or _distances(stack, sample.matrix).min() > insertion_ratio * eps:
            members.append(sample)
            stack = np.stack([m.matrix for m in members])
            misses = 0
        else:
            misses += 1
    logging.info(f"covering set for d={1 << num_qubits}, eps={eps}: {len(members)} members after {draws} draws")
    return CoveringSet(num_qubits, eps, tuple(members))


def audit_covering_set(cs: CoveringSet, samples: int, rng) -> dict:
    """Fraction of fresh random states within eps of the set, and the worst distance seen."""
    gen = as_stream(rng).generator
    stack = cs.stacked()
    worst = 0.0
    covered = 0
    for _ in range(samples):
        d = _distances(stack, random_density_matrix(cs.num_qubits, gen).matrix).min()
        worst = max(worst, float(d))
        covered += d <= cs.epsilon
    return {"samples": samples, "covered": int(covered), "fraction": covered / samples, "worst": worst}


def project_to_covering(rho: DensityMatrix, cs: CoveringSet) -> DensityMatrix:
    if not cs.members:
        raise ValueError("covering set is empty")
    if rho.num_qubits != cs.num_qubits:
        raise DimensionError(f"{rho.num_qubits}-qubit state against a {cs.num_qubits}-qubit covering set")
    distances = [trace_distance(rho, m) for m in cs.members]
    return cs.members[int(np.argmin(distances))]
