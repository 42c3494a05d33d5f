from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qpcp.circuits import GateSpec
from qpcp.linalg import eigh_hermitian, embed_operator, min_eigenvalue, operator_norm, random_hermitian
from qpcp.reduction import HamiltonianTerm, LocalHamiltonian, PreconditionViolation
from qpcp.rng import as_stream
from qpcp.utils import ceil_int
from qpcp.verifier import NonAdaptiveVerifier, index_register_size

PSD_TOLERANCE = 1e-9


def ground_energy(h: LocalHamiltonian) -> float:
    return min_eigenvalue(h.to_matrix())


def ground_state(h: LocalHamiltonian) -> tuple[float, np.ndarray]:
    w, v = eigh_hermitian(h.to_matrix())
    return float(w[0]), v[:, 0]


def _lift(matrix: np.ndarray, support: Sequence[int], target: Sequence[int]) -> np.ndarray:
    """Extend an operator on `support` to the larger sorted support `target` by identity."""
    positions = [target.index(s) for s in support]
    return embed_operator(matrix, positions, len(target))


def split_count(alpha: float, m: int) -> int:
    """Number of norm-1/(2m) pieces split off a term of norm alpha."""
    return int(math.floor(2 * m * alpha - 1 + 1e-12))


def _check_psd_terms(h: LocalHamiltonian):
    for i, t in enumerate(h.terms):
        lam = min_eigenvalue(t.matrix)
        if lam < -PSD_TOLERANCE:
            raise PreconditionViolation(f"term {i} has negative eigenvalue {lam:.3e}")


def smooth(h: LocalHamiltonian, locality: int | None = None) -> LocalHamiltonian:
    """Redistribute term norms so every term of H' = (1/m) sum H'_i obeys 0 <= H'_i <= I
    while H' = H / 2^(q+3)."""
    q = h.locality if locality is None else locality
    m = len(h.terms)
    if m == 0:
        raise PreconditionViolation("cannot smooth an empty Hamiltonian")
    _check_psd_terms(h)
    norm = h.norm()
    if norm > 1 + PSD_TOLERANCE:
        raise PreconditionViolation(f"Hamiltonian norm {norm:.6f} exceeds 1")

    scale = 2.0 ** (q + 3)
    scaled = [h.coefficient(i) * t.matrix / scale for i, t in enumerate(h.terms)]
    alphas = [operator_norm(s) for s in scaled]
    small = [i for i in range(m) if alphas[i] <= 1 / (2 * m)]
    large = sorted((i for i in range(m) if alphas[i] > 1 / m), key=lambda i: (-alphas[i], i))

    pieces = {i: [(h.terms[i].support, scaled[i])] for i in range(m)}
    free = list(small)
    used = 0
    for j in large:
        t = split_count(alphas[j], m)
        if t > len(free):
            raise PreconditionViolation(f"redistribution needs {used + t} light terms, only {len(small)} exist")
        piece = scaled[j] / (2 * m * alphas[j])
        for i in free[:t]:
            pieces[i].append((h.terms[j].support, piece))
        free = free[t:]
        used += t
        pieces[j] = [(h.terms[j].support, (1 - t / (2 * m * alphas[j])) * scaled[j])]
    logging.debug(f"smoothing: m={m} heavy={len(large)} light={len(small)} pieces moved={used}")

    terms = []
    for i in range(m):
        support = tuple(sorted(set().union(*(s for s, _ in pieces[i]))))
        total = sum(_lift(mat, s, list(support)) for s, mat in pieces[i])
        terms.append(HamiltonianTerm(support, m * total))
    return LocalHamiltonian(h.num_qubits, tuple(terms), weights=tuple([1.0 / m] * m))


def _padded_tuple(support: tuple[int, ...], q: int, num_qubits: int) -> tuple[int, ...]:
    pad = [i for i in range(num_qubits) if i not in support][:q - len(support)]
    return tuple(support) + tuple(pad)


def _rotation(lam: float) -> np.ndarray:
    a, b = math.sqrt(lam), math.sqrt(1 - lam)
    return np.array([[a, -b], [b, a]], dtype=np.complex128)


def energy_unitary(matrix: np.ndarray) -> np.ndarray:
    """W = sum_l |l><l| (x) R(l): |l>|0> -> |l>(sqrt(l)|0> + sqrt(1-l)|1>), output qubit last."""
    w, v = eigh_hermitian(matrix)
    w = np.clip(w, 0.0, 1.0)
    out = np.zeros((2 * len(w), 2 * len(w)), dtype=np.complex128)
    for lam, vec in zip(w, v.T):
        out += np.kron(np.outer(vec, vec.conj()), _rotation(float(lam)))
    return out


def _householder(target: np.ndarray) -> np.ndarray:
    """Real reflection taking |0> to the nonnegative unit vector `target`."""
    dim = target.shape[0]
    w = -target.astype(np.complex128)
    w[0] += 1.0
    nrm = np.vdot(w, w).real
    if nrm < 1e-24:
        return np.eye(dim, dtype=np.complex128)
    return np.eye(dim, dtype=np.complex128) - 2 * np.outer(w, w.conj()) / nrm


def kitaev_verifier(h: LocalHamiltonian) -> NonAdaptiveVerifier:
    """Pick term i with probability p_i, read its qubits, rotate an ancilla by the term's spectrum and
    accept on |1>: Pr[accept] = 1 - tr[H xi]."""
    if h.weights is None:
        raise PreconditionViolation("energy estimation needs term weights p_i")
    _check_psd_terms(h)
    for i, t in enumerate(h.terms):
        if operator_norm(t.matrix) > 1 + PSD_TOLERANCE:
            raise PreconditionViolation(f"term {i} has norm above 1")
    p2 = h.num_qubits
    q = max(h.locality, 1)
    if q > p2:
        raise PreconditionViolation(f"{q}-local terms on {p2} qubits")
    width = index_register_size(p2)

    tuples = [_padded_tuple(t.support, q, p2) for t in h.terms]
    seen: dict[tuple, int] = {}
    tags = []
    for tup in tuples:
        tags.append(seen.get(tup, 0))
        seen[tup] = seen.get(tup, 0) + 1
    tag_bits = max(max(seen.values()) - 1, 0).bit_length()

    registers = tuple(tuple(range(s * width, (s + 1) * width)) for s in range(q))
    tag_register = tuple(range(q * width, q * width + tag_bits))
    output = q * width + tag_bits
    p1 = output + 1
    control = tuple(r for reg in registers for r in reg) + tag_register

    def label(tup, tag):
        bits = "".join(format(i, f"0{width}b") if width else "" for i in tup)
        return bits + (format(tag, f"0{tag_bits}b") if tag_bits else "")

    amplitudes = np.zeros(1 << len(control))
    for i, (tup, tag) in enumerate(zip(tuples, tags)):
        idx = int(label(tup, tag), 2) if control else 0
        amplitudes[idx] += math.sqrt(h.weights[i])
    prepare = ()
    if control:
        prepare = (GateSpec(control, unitary=_householder(amplitudes)),)

    slots = tuple(f"q{s}" for s in range(1, q + 1))
    decide = []
    for i, (t, tup, tag) in enumerate(zip(h.terms, tuples, tags)):
        if h.weights[i] == 0:
            continue
        padded = _lift(t.matrix, t.support, list(t.support) + [p for p in tup if p not in t.support])
        gate = GateSpec(slots + (output,), unitary=energy_unitary(padded), controls=control,
                        control_state=label(tup, tag))
        decide.append(gate)
    return NonAdaptiveVerifier(n=0, p1=p1, k=1, p2=p2, q=q, prepare=prepare, decide=tuple(decide),
                               index_registers=registers, output_qubit=output)


def sample_count(gamma: float, n: int, delta: float) -> int:
    """l = ceil((128/gamma^2) (n ln 2 + ln(1/delta)))."""
    if gamma <= 0 or gamma > 1:
        raise ValueError(f"gamma={gamma} must lie in (0, 1]")
    if not 0 < delta <= 1:
        raise ValueError(f"delta={delta} must lie in (0, 1]")
    return max(ceil_int(128 / gamma ** 2 * (n * math.log(2) + math.log(1 / delta))), 0)


def sampling_failure_bound(num_qubits: int, gamma: float, l: int) -> float:
    return 2 ** num_qubits * math.exp(-gamma ** 2 * l / 128)


def sample_terms(h: LocalHamiltonian, l: int, rng, smooth_output: bool = True) -> LocalHamiltonian:
    """G = (1/l) sum_k H_{i_k} with i_k uniform, smoothed to G / 2^(q+3) unless smooth_output is off.

    The raw sample keeps each draw as a separate term."""
    if l < 1:
        raise ValueError("need at least one sample")
    m = len(h.terms)
    if h.weights is None or max(h.weights) - min(h.weights) > 1e-12:
        raise PreconditionViolation("term sampling needs a uniformly weighted Hamiltonian")
    _check_psd_terms(h)
    draws = as_stream(rng).generator.integers(0, m, size=l)
    g = LocalHamiltonian(h.num_qubits, tuple(h.terms[int(i)] for i in draws), weights=tuple([1.0 / l] * l),
                         locality=h.locality)
    if smooth_output:
        return smooth(g)
    return g


@dataclass
class ErrorCheckReport:
    measured: float
    bound: float
    chain_bound: float
    holds: bool
    violations: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"measured": self.measured, "bound": self.bound, "chain_bound": self.chain_bound,
                "holds": self.holds, "violations": list(self.violations)}


def weighted_error_check(h: LocalHamiltonian, h_tilde: LocalHamiltonian, eps0: float, eps1: float,
                         p_tilde: Sequence[float] | None = None) -> ErrorCheckReport:
    """Compare sum p_i H_i with the renormalized estimate sum p^_i H^_i, p^ = p~/sum p~ and
    H^_i = H~_i / max(max ||H~_i||, 1).

    Raw weight estimates p~ need not sum to one; when omitted they are read from h_tilde."""
    m = len(h.terms)
    if len(h_tilde.terms) != m or h.num_qubits != h_tilde.num_qubits:
        raise PreconditionViolation("Hamiltonians have different term lists")
    p = np.array([h.coefficient(i) for i in range(m)])
    if p_tilde is None:
        p_tilde = [h_tilde.coefficient(i) for i in range(m)]
    p_tilde = np.asarray(p_tilde, dtype=float)
    if p_tilde.shape != (m,) or p_tilde.sum() <= 0:
        raise PreconditionViolation("weight estimates must be one positive-sum value per term")
    violations = []
    for i in range(m):
        if h.terms[i].support != h_tilde.terms[i].support:
            raise PreconditionViolation(f"term {i} supports differ")
        if abs(p_tilde[i] - p[i]) > eps0 + 1e-15:
            violations.append(f"weight {i}: |p~ - p| = {abs(p_tilde[i] - p[i]):.3e} > eps0")
        diff = operator_norm(h.terms[i].matrix - h_tilde.terms[i].matrix)
        if diff > eps1 + 1e-12:
            violations.append(f"term {i}: ||H - H~|| = {diff:.3e} > eps1")
    for v in violations:
        logging.warning(f"weighted error check precondition: {v}")

    p_hat = p_tilde / p_tilde.sum()
    scale = max(h_tilde.max_term_norm(), 1.0)
    target = sum(p[i] * h.term_operator(i) for i in range(m))
    estimate = sum(p_hat[i] * h_tilde.term_operator(i) / scale for i in range(m))
    measured = operator_norm(target - estimate)
    bound = max(8 * m * m * eps0, 6 * eps1)
    spread = m * eps0
    chain = 2 * eps1 + (2 * spread / (1 - spread) if spread < 1 else math.inf)
    holds = bool(measured <= bound + 1e-12 and measured <= chain + 1e-12)
    return ErrorCheckReport(float(measured), float(bound), float(chain), holds, violations)


def perturb_weighted(h: LocalHamiltonian, eps0: float, eps1: float, rng) -> tuple[LocalHamiltonian, np.ndarray]:
    """Worst-case-sized estimates: every weight moved by exactly +-eps0 (kept nonnegative) and
    every term by a random Hermitian matrix of norm eps1."""
    gen = as_stream(rng).generator
    m = len(h.terms)
    p = np.array([h.coefficient(i) for i in range(m)])
    p_tilde = np.clip(p + eps0 * gen.choice([-1.0, 1.0], size=m), 0.0, None)
    terms = []
    for t in h.terms:
        e = random_hermitian(t.matrix.shape[0], gen)
        terms.append(HamiltonianTerm(t.support, t.matrix + eps1 * e / operator_norm(e)))
    return LocalHamiltonian(h.num_qubits, tuple(terms), locality=h.locality), p_tilde
