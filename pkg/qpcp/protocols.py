from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import binom

from qpcp.circuits import adjoint_circuit, apply_circuit, project_qubits, to_batch
from qpcp.hamiltonian import ground_energy, kitaev_verifier, smooth
from qpcp.linalg import DensityMatrix, DimensionError, embed_operator, kron_all, min_eigenvalue, partial_trace, trace_norm
from qpcp.reduction import LocalHamiltonian, learn_hamiltonian_rounded, protocol_eta
from qpcp.rng import as_stream
from qpcp.tomography import cldm_decide, estimate_marginals
from qpcp.utils import ceil_int
from qpcp.verifier import (AnyVerifier, NonAdaptiveVerifier, RepeatedVerifier, accept_probability_exact,
                           accept_operator, branch_leaves, parallel_repeat, path_distribution)

DEFAULT_DELTA = 1 - math.sqrt(2 / 3)
DEFAULT_SOUNDNESS_TARGET = 0.1
WITNESS_TOLERANCE = 1e-9


class RegisterOverlapError(ValueError):
    pass


class MalformedWitnessError(ValueError):
    pass


@dataclass
class ProtocolParameters:
    c: float
    s: float
    eps: float
    a: float
    b: float
    delta: float = DEFAULT_DELTA
    eta: Optional[int] = None
    repetitions: Optional[int] = None
    executed_repetitions: Optional[int] = None
    threshold: Optional[float] = None
    midpoint_threshold: Optional[float] = None
    confidence: Optional[float] = None
    completeness_error: Optional[float] = None
    soundness_error: Optional[float] = None
    a_prime: Optional[float] = None
    b_prime: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    literal: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if v is not None}
        out["paper_literal"] = out.pop("literal")
        return out


def decision_energies(c: float, s: float) -> tuple[float, float, float]:
    """(eps, a, b) with eps = (c-s)/4, a = (1-c)+eps, b = (1-s)-eps: the energy window of the
    learned Hamiltonian, whose ground energy is one minus the best acceptance probability."""
    if not c > s:
        raise ValueError(f"completeness {c} must exceed soundness {s}")
    eps = (c - s) / 4
    return eps, (1 - c) + eps, (1 - s) - eps


def exact_lh_oracle(h: LocalHamiltonian, a: float, b: float) -> bool:
    """Accept iff lambda_min(H) <= (a+b)/2."""
    return ground_energy(h) <= (a + b) / 2


@dataclass
class NonAdaptiveSimulation:
    learned: LocalHamiltonian
    smoothed: LocalHamiltonian
    kitaev: NonAdaptiveVerifier
    composite: RepeatedVerifier
    parameters: ProtocolParameters

    @property
    def query_count(self) -> int:
        return self.kitaev.q * self.parameters.repetitions

    def copy_acceptance(self, xi: DensityMatrix) -> float:
        return accept_probability_exact(self.kitaev, "", xi)

    def acceptance(self, xi: DensityMatrix) -> float:
        return self.composite.acceptance([self.copy_acceptance(xi)] * self.composite.repetitions)

    def query_distribution(self, xi, copies: int = 1) -> dict[tuple[int, ...], float]:
        """Joint distribution of the queried indices over the first `copies` proof copies.

        `xi` is one proof (reused for every copy) or a list of per-copy proofs; copy r reads
        indices offset by r times the single-copy proof size."""
        proofs = [xi] * copies if isinstance(xi, DensityMatrix) else list(xi)[:copies]
        if len(proofs) != copies:
            raise DimensionError(f"{len(proofs)} proof copies for {copies} copies")
        width = self.kitaev.num_proof_qubits
        dist = {(): 1.0}
        for r, proof in enumerate(proofs):
            single = path_distribution(self.kitaev, "", proof)
            dist = {prefix + tuple(r * width + i for i in path): p * w
                    for prefix, p in dist.items() for path, w in single.items()}
        return dist

    def sampled_decisions(self, xi: DensityMatrix, trials: int, rng) -> list[bool]:
        """Seeded composite decisions; the copies are i.i.d., so each decision is a binomial draw
        at the exact per-copy acceptance."""
        p = self.copy_acceptance(xi)
        stream = as_stream(rng)
        out = []
        for t in range(trials):
            accepts = stream.child(f"trial={t}").generator.binomial(self.composite.repetitions, p)
            out.append(bool(accepts >= self.composite.required_accepts))
        return out


def repetition_errors(required: int, executed: int, a: float, b: float) -> tuple[float, float]:
    """(Pr[Bin(R, 1-a) < T], Pr[Bin(R, 1-b) >= T]) for T = required accepts out of R copies whose
    energies are at most a (yes) or at least b (no)."""
    return float(binom.cdf(required - 1, executed, 1 - a)), float(binom.sf(required - 1, executed, 1 - b))


def repetition_threshold(executed: int, a: float, b: float, soundness_target: float) -> tuple[int, float, float]:
    """Smallest accept count T whose binomial tail at the no-instance copy acceptance 1-b is at most
    `soundness_target`, capped at `executed`.

    Returns T with its completeness and soundness errors."""
    counts = np.arange(1, executed + 1)
    tails = binom.sf(counts - 1, executed, 1 - b)
    below = np.nonzero(tails <= soundness_target)[0]
    if below.size:
        required = int(counts[below[0]])
    else:
        required = executed
        logging.warning(f"no accept count out of {executed} keeps soundness below {soundness_target}; "
                        f"requiring all copies to accept")
    return (required,) + repetition_errors(required, executed, a, b)


def nonadaptive_simulation(v: AnyVerifier, x: str, c: float, s: float, rng, repetition_cap: int = 64,
                           eta: Optional[int] = None, delta: float = DEFAULT_DELTA,
                           soundness_target: float = DEFAULT_SOUNDNESS_TARGET) -> NonAdaptiveSimulation:
    """Learn a fixed Hamiltonian from v, smooth it, measure it with a one-shot energy-estimation
    verifier and repeat that verifier in parallel.

    The full repetition count R is reported and `min(R, repetition_cap)` copies are built. At full R
    the copies accept at the midpoint 1 - (a+b)/2 of the smoothed energy window; a truncated run
    instead takes the threshold from the exact binomial tails at its own copy count."""
    eps, a, b = decision_energies(c, s)
    if eta is None:
        eta = protocol_eta(v.q, v.k, v.p2, eps)
    repetitions = ceil_int(2 * (2 ** (v.q + 4) / (c - s)) ** 2)
    executed = min(repetitions, repetition_cap)
    scale = 2 ** (v.q + 3)
    a2, b2 = a / scale, b / scale
    midpoint = 1 - (a2 + b2) / 2
    if executed < repetitions:
        required, completeness_error, soundness_error = repetition_threshold(executed, a2, b2, soundness_target)
    else:
        required = ceil_int(midpoint * executed)
        completeness_error, soundness_error = repetition_errors(required, executed, a2, b2)
    threshold = required / executed
    confidence = 1 - max(completeness_error, soundness_error)
    logging.info(f"non-adaptive simulation: eta={eta} R={repetitions} executed={executed} "
                 f"accepts required={required} soundness error={soundness_error:.4f}")

    stream = as_stream(rng)
    learned = learn_hamiltonian_rounded(v, x, eta, delta, stream.child("learn"))
    smoothed = smooth(learned, v.q)
    kitaev = kitaev_verifier(smoothed)
    composite = parallel_repeat(kitaev, executed, threshold)
    params = ProtocolParameters(
        c=c, s=s, eps=eps, a=a, b=b, delta=delta, eta=eta, repetitions=repetitions, executed_repetitions=executed,
        threshold=threshold, midpoint_threshold=midpoint, confidence=confidence,
        completeness_error=completeness_error, soundness_error=soundness_error,
        literal={"threshold_fraction": (c - s) / 2 ** (v.q + 4), "a": s + eps, "b": c - eps})
    return NonAdaptiveSimulation(learned, smoothed, kitaev, composite, params)


def qcma_pipeline(v: AnyVerifier, x: str, c: float, s: float, rng,
                  lh_oracle: Callable[[LocalHamiltonian, float, float], bool] = exact_lh_oracle,
                  eta: Optional[int] = None, delta: float = DEFAULT_DELTA) -> tuple[bool, dict]:
    eps, a, b = decision_energies(c, s)
    if eta is None:
        eta = protocol_eta(v.q, v.k, v.p2, eps)
    learned = learn_hamiltonian_rounded(v, x, eta, delta, as_stream(rng).child("learn"))
    decision = bool(lh_oracle(learned, a, b))
    params = ProtocolParameters(c=c, s=s, eps=eps, a=a, b=b, delta=delta, eta=eta,
                                literal={"a": c + eps / 4, "b": c - eps / 4})
    report = {"parameters": params.as_dict(), "ground_energy": ground_energy(learned), "accept": decision}
    return decision, report


@dataclass
class AndResult:
    accepted: bool
    probability: float
    per_verifier: list[float]
    product: float
    registers: list[tuple[int, ...]]


def proof_registers(entries: Sequence[tuple[AnyVerifier, str]], num_qubits: int,
                    registers: Optional[Sequence[Sequence[int]]] = None) -> list[tuple[int, ...]]:
    """Per-verifier proof registers: the given ones, or consecutive blocks in verifier order."""
    if registers is None:
        registers, start = [], 0
        for v, _ in entries:
            registers.append(tuple(range(start, start + v.num_proof_qubits)))
            start += v.num_proof_qubits
    registers = [tuple(r) for r in registers]
    if len(registers) != len(entries):
        raise DimensionError(f"{len(registers)} registers for {len(entries)} verifiers")
    seen: set[int] = set()
    for (v, _), r in zip(entries, registers):
        if len(r) != v.num_proof_qubits:
            raise DimensionError(f"register {r} has {len(r)} qubits, verifier reads {v.num_proof_qubits}")
        if any(q < 0 or q >= num_qubits for q in r):
            raise DimensionError(f"register {r} leaves the {num_qubits}-qubit proof")
        if seen & set(r) or len(set(r)) != len(r):
            raise RegisterOverlapError(f"proof registers overlap on qubits {sorted(seen & set(r)) or list(r)}")
        seen |= set(r)
    return registers


def and_of_verifiers(entries: Sequence[tuple[AnyVerifier, str]], proof, rng,
                     registers: Optional[Sequence[Sequence[int]]] = None) -> AndResult:
    """Run every verifier on its own register of one joint proof; accept iff all accept.

    `proof` is a DensityMatrix over all registers, or a list of per-verifier proofs that is
    combined into their product state. The joint acceptance is tr[(A_1 x ... x A_l) proof]
    with A_i the accept operator of verifier i lifted onto its register."""
    if not isinstance(proof, DensityMatrix):
        proofs = list(proof)
        if len(proofs) != len(entries):
            raise DimensionError(f"{len(proofs)} proofs for {len(entries)} verifiers")
        proof = product_state(proofs)
    regs = proof_registers(entries, proof.num_qubits, registers)
    dim = 1 << proof.num_qubits
    lifted = [embed_operator(accept_operator(v, x), reg, proof.num_qubits) for (v, x), reg in zip(entries, regs)]
    per_verifier = [float(np.clip(np.trace(op @ proof.matrix).real, 0.0, 1.0)) for op in lifted]

    joint = np.eye(dim, dtype=np.complex128)
    stream = as_stream(rng)
    accepted, reached = True, 1.0
    for i, op in enumerate(lifted):
        joint = joint @ op
        upto = float(np.clip(np.trace(joint @ proof.matrix).real, 0.0, 1.0))
        if accepted:
            conditional = upto / reached if reached > 0 else 0.0
            accepted = bool(stream.child(f"verifier={i}").generator.random() < conditional)
        reached = upto
    probability = reached if entries else 1.0
    logging.debug(f"AND of {len(entries)} verifiers: joint {probability:.6f}, marginals {per_verifier}")
    return AndResult(accepted, probability, per_verifier, float(np.prod(per_verifier)) if per_verifier else 1.0, regs)


def product_state(states: Sequence[DensityMatrix]) -> DensityMatrix:
    return DensityMatrix(sum(s.num_qubits for s in states), kron_all(s.matrix for s in states))


def register_qubits(num_qubits: int, k: int) -> list[tuple[int, ...]]:
    if k < 1 or num_qubits % k:
        raise MalformedWitnessError(f"{num_qubits} qubits do not split into {k} equal registers")
    size = num_qubits // k
    return [tuple(range(j * size, (j + 1) * size)) for j in range(k)]


def honest_classical_witness(h: LocalHamiltonian, register_states: Sequence[DensityMatrix], k: int) -> list[list[DensityMatrix]]:
    """rho_i^j = marginal of register j's state on the qubits of term i inside register j."""
    regs = register_qubits(h.num_qubits, k)
    if len(register_states) != k:
        raise MalformedWitnessError(f"{len(register_states)} register states for k={k}")
    witness = []
    for t in h.terms:
        row = []
        for reg, state in zip(regs, register_states):
            local = [reg.index(i) for i in t.support if i in reg]
            row.append(partial_trace(state, local))
        witness.append(row)
    return witness


def _check_witness_shapes(h: LocalHamiltonian, witness, regs):
    if len(witness) != len(h.terms):
        raise MalformedWitnessError(f"{len(witness)} witness rows for {len(h.terms)} terms")
    for i, (t, row) in enumerate(zip(h.terms, witness)):
        if len(row) != len(regs):
            raise MalformedWitnessError(f"row {i} has {len(row)} entries for {len(regs)} registers")
        for j, (reg, rho) in enumerate(zip(regs, row)):
            expected = 1 << sum(1 for q in t.support if q in reg)
            if np.shape(rho) != (expected, expected):
                raise MalformedWitnessError(f"witness ({i}, {j}) has shape {np.shape(rho)}, expected {expected}")


def k_separable_check(h: LocalHamiltonian, a: float, b: float, classical_witness, quantum_witness: DensityMatrix,
                      rng, k: int = 1) -> tuple[bool, dict]:
    """Check 1: every rho_i^j is a state. Check 2: the witness energy is at most a'.
    Check 3: every register of the quantum witness is consistent with its claimed marginals."""
    if not b > a:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    regs = register_qubits(h.num_qubits, k)
    witness = [[np.asarray(r.matrix if isinstance(r, DensityMatrix) else r, dtype=np.complex128) for r in row]
               for row in classical_witness]
    _check_witness_shapes(h, witness, regs)
    if quantum_witness.num_qubits != h.num_qubits:
        raise MalformedWitnessError(f"{quantum_witness.num_qubits}-qubit quantum witness for {h.num_qubits} qubits")

    m, q = len(h.terms), max(h.locality, 1)
    a_prime, b_prime = a + (b - a) / 4, b - (b - a) / 4
    beta = (b - a) / (2 * q * m)
    alpha = beta / 8 ** q
    delta = 1 / (3 * k)
    params = ProtocolParameters(c=1 - a, s=1 - b, eps=(b - a) / 4, a=a, b=b, delta=delta, a_prime=a_prime,
                                b_prime=b_prime, alpha=alpha, beta=beta, literal={"delta": k / 3})
    report = {"parameters": params.as_dict(), "checks": {}}

    check1 = True
    for row in witness:
        for rho in row:
            ok = (abs(np.trace(rho).real - 1) <= WITNESS_TOLERANCE and np.allclose(rho, rho.conj().T, atol=WITNESS_TOLERANCE)
                  and min_eigenvalue(rho) >= -WITNESS_TOLERANCE)
            check1 = check1 and ok
    report["checks"]["states"] = check1
    if not check1:
        logging.info("k-separable check: classical witness is not a list of states")
        report["accept"] = False
        return False, report

    energy = 0.0
    for i, (t, row) in enumerate(zip(h.terms, witness)):
        energy += h.coefficient(i) * float(np.real(np.trace(t.matrix @ kron_all(row))))
    check2 = energy <= a_prime + WITNESS_TOLERANCE
    report["checks"]["energy"] = check2
    report["witness_energy"] = energy
    if not check2:
        report["accept"] = False
        return False, report

    stream = as_stream(rng)
    tomography_eps = (beta - alpha) / 4
    check3 = True
    for j, reg in enumerate(regs):
        local = partial_trace(quantum_witness, reg)
        subsets, targets = [], []
        for t, row in zip(h.terms, witness):
            inside = [reg.index(i) for i in t.support if i in reg]
            if inside:
                subsets.append(inside)
                targets.append(DensityMatrix(len(inside), row[j]))
        if not subsets:
            continue
        estimates = estimate_marginals(local, subsets, tomography_eps, delta, stream.child(f"register={j}"))
        check3 = check3 and cldm_decide(estimates, targets, alpha, tomography_eps)
    report["checks"]["consistency"] = check3
    report["accept"] = bool(check3)
    return bool(check3), report


def qma_for_qpcp(v: AnyVerifier, x: str, c: float, s: float, classical_witness, quantum_witness: DensityMatrix,
                 rng, eta: Optional[int] = None, delta: float = DEFAULT_DELTA) -> tuple[bool, dict]:
    """Learn H~_x at eta bits, then run the k-separable check on the witnesses.

    A classical_witness of None is replaced by the honest one: the marginals of each register
    of quantum_witness on the learned terms."""
    eps, a, b = decision_energies(c, s)
    if eta is None:
        eta = protocol_eta(v.q, v.k, v.p2, eps)
    stream = as_stream(rng)
    learned = learn_hamiltonian_rounded(v, x, eta, delta, stream.child("learn"))
    if classical_witness is None:
        regs = register_qubits(learned.num_qubits, v.k)
        classical_witness = honest_classical_witness(learned, [partial_trace(quantum_witness, r) for r in regs], v.k)
    decision, report = k_separable_check(learned, a, b, classical_witness, quantum_witness, stream.child("check"), k=v.k)
    report["eta"] = eta
    return decision, report


def _proof_columns(v: AnyVerifier, sigma: np.ndarray) -> np.ndarray:
    w, vecs = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    keep = w > 1e-15
    cols = vecs[:, keep] * np.sqrt(w[keep])
    full = np.zeros((1 << v.num_qubits, cols.shape[1]), dtype=np.complex128)
    full[:cols.shape[0], :] = cols
    return to_batch(full, v.num_qubits)


def _proof_state(v: AnyVerifier, batch: np.ndarray) -> np.ndarray:
    c = batch.reshape(1 << v.proof_offset, 1 << v.num_proof_qubits, -1)
    return np.einsum("air,ajr->ij", c, c.conj())


def run_on_proof(v: AnyVerifier, x: str, sigma: np.ndarray, uncompute: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized proof states after an accepting (final circuit undone) and a rejecting run,
    with the ancillas discarded."""
    dim = 1 << v.num_proof_qubits
    accepted = np.zeros((dim, dim), dtype=np.complex128)
    rejected = np.zeros((dim, dim), dtype=np.complex128)
    if np.trace(sigma).real <= 0:
        return accepted, rejected
    for path, batch in branch_leaves(v, x, _proof_columns(v, sigma)):
        acc = project_qubits(batch, [v.output_qubit], 1)
        if uncompute:
            acc = apply_circuit(acc, adjoint_circuit(v.resolve(v.final_circuit(), path)))
        accepted += _proof_state(v, acc)
        rejected += _proof_state(v, project_qubits(batch, [v.output_qubit], 0))
    return accepted, rejected


@dataclass
class StrongReductionResult:
    accepted: bool
    probability: float
    round_probabilities: list[float]
    count_distribution: list[float]
    disturbance: float


def strong_error_reduction(v: AnyVerifier, x: str, xi: DensityMatrix, l: int, rng,
                           threshold: float = 0.5) -> StrongReductionResult:
    """l sequential runs on one proof register; accept when at least threshold*l runs accept."""
    if l < 1:
        raise ValueError("need at least one round")
    if threshold == 0.5 and l % 2 == 0:
        raise ValueError("majority vote needs an odd number of rounds")
    buckets = {0: np.asarray(xi.matrix, dtype=np.complex128)}
    rounds = []
    for r in range(l):
        nxt: dict[int, np.ndarray] = {}
        p_accept = 0.0
        for count, sigma in buckets.items():
            acc, rej = run_on_proof(v, x, sigma)
            p_accept += float(np.trace(acc).real)
            nxt[count + 1] = nxt.get(count + 1, 0) + acc
            nxt[count] = nxt.get(count, 0) + rej
        buckets = nxt
        rounds.append(p_accept)
        logging.debug(f"strong reduction round {r + 1}: accept weight {p_accept:.6f}")
    dist = [float(np.trace(buckets[c]).real) if c in buckets else 0.0 for c in range(l + 1)]
    needed = ceil_int(threshold * l)
    probability = float(min(max(sum(dist[needed:]), 0.0), 1.0))
    final = sum(buckets.values())
    disturbance = 0.5 * trace_norm(final - xi.matrix)
    weights = np.clip(np.array(dist), 0.0, None)
    draw = int(as_stream(rng).generator.choice(l + 1, p=weights / weights.sum()))
    return StrongReductionResult(draw >= needed, probability, rounds, dist, disturbance)


def gentle_measurement_check(v: AnyVerifier, x: str, xi: DensityMatrix) -> dict:
    """||xi - xi'||_1 after one accepting run plus uncompute, against 2 sqrt(eps), eps = Pr[reject]."""
    acc, _ = run_on_proof(v, x, np.asarray(xi.matrix))
    p = float(np.trace(acc).real)
    eps = max(1 - p, 0.0)
    if p <= 0:
        return {"accept_probability": p, "measured": None, "bound": 2.0, "holds": True}
    measured = trace_norm(xi.matrix - acc / p)
    bound = 2 * math.sqrt(eps)
    return {"accept_probability": p, "measured": measured, "bound": bound, "holds": measured <= bound + 1e-9}
