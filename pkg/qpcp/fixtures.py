from __future__ import annotations

import itertools
import math
from typing import Optional

import numpy as np

from qpcp import serialization
from qpcp.circuits import GateSpec
from qpcp.linalg import (DensityMatrix, StateVector, complete_unitary, haar_state, kron_all, partial_trace,
                         random_psd, random_unitary)
from qpcp.protocols import honest_classical_witness
from qpcp.reduction import HamiltonianTerm, LocalHamiltonian
from qpcp.rng import as_stream
from qpcp.tomography import MarginalSpec
from qpcp.verifier import AdaptiveVerifier, NonAdaptiveVerifier, index_register_size

FAMILIES = ("reject-always", "accept-always", "random-q1", "random-q2", "ghz-cldm", "product-ksep")


class UnknownFixtureError(ValueError):
    pass


def _layout(n: int, p1: int, k: int, p2: int):
    size = index_register_size(k * p2)
    if p1 < size + 1:
        raise ValueError(f"p1={p1} leaves no room for a {size}-qubit index register and an output qubit")
    register = tuple(range(n, n + size))
    output = n + size
    extras = tuple(range(output + 1, n + p1))
    return register, output, extras


def _walk_register(register: tuple[int, ...], t: int) -> list[GateSpec]:
    """X gates moving the index register from value t-1 to value t."""
    flip = (t - 1) ^ t
    size = len(register)
    return [GateSpec((register[pos],), name="X") for pos in range(size) if (flip >> (size - 1 - pos)) & 1]


def constant_verifier(accept: bool, n: int = 0, p1: int = 2, k: int = 1, p2: int = 2, q: int = 1) -> AdaptiveVerifier:
    """Queries indices 0, 1, ..., q-1 in order and outputs a fixed answer."""
    register, output, _ = _layout(n, p1, k, p2)
    circuits = [[] for _ in range(q + 1)]
    for t in range(1, q):
        circuits[t] = _walk_register(register, t)
    if accept:
        circuits[q] = [GateSpec((output,), name="X")]
    return AdaptiveVerifier(n, p1, k, p2, q, tuple(tuple(c) for c in circuits), register, output)


def reject_always_verifier(**kwargs) -> AdaptiveVerifier:
    return constant_verifier(False, **kwargs)


def accept_always_verifier(**kwargs) -> AdaptiveVerifier:
    return constant_verifier(True, **kwargs)


def _index_prep(register: tuple[int, ...], value: int) -> list[GateSpec]:
    size = len(register)
    return [GateSpec((register[pos],), name="X") for pos in range(size) if (value >> (size - 1 - pos)) & 1]


def copy_qubit_verifier(p2: int = 2, position: int = 0, n: int = 0, k: int = 1) -> AdaptiveVerifier:
    """Queries one fixed proof qubit and copies it to the output: accepts iff it reads 1."""
    register, output, _ = _layout(n, index_register_size(k * p2) + 1, k, p2)
    circuits = (tuple(_index_prep(register, position)), (GateSpec(("q1", output), name="CNOT"),))
    return AdaptiveVerifier(n, len(register) + 1, k, p2, 1, circuits, register, output)


def hadamard_output_verifier(p2: int = 2, k: int = 1, position: int = 0) -> AdaptiveVerifier:
    """Accepts with probability 1/2 on every proof."""
    register, output, _ = _layout(0, index_register_size(k * p2) + 1, k, p2)
    circuits = (tuple(_index_prep(register, position)), (GateSpec((output,), name="H"),))
    return AdaptiveVerifier(0, len(register) + 1, k, p2, 1, circuits, register, output)


def _ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def biased_nonadaptive_verifier(accept_if_one: float, accept_if_zero: float) -> NonAdaptiveVerifier:
    """One proof qubit, always queried; accepts with the given probability for each basis value."""
    decide = []
    for state, p in (("0", accept_if_zero), ("1", accept_if_one)):
        theta = 2 * math.asin(math.sqrt(min(max(p, 0.0), 1.0)))
        decide.append(GateSpec((0,), unitary=_ry(theta), controls=("q1",), control_state=state))
    return NonAdaptiveVerifier(n=0, p1=1, k=1, p2=1, q=1, prepare=(), decide=tuple(decide),
                               index_registers=((),), output_qubit=0)


def _random_layer(gen: np.random.Generator, qubits: list, depth: int) -> list[GateSpec]:
    gates = []
    for _ in range(depth):
        for qb in qubits:
            gates.append(GateSpec((qb,), unitary=random_unitary(2, gen)))
        if len(qubits) > 1:
            a, b = gen.choice(len(qubits), size=2, replace=False)
            gates.append(GateSpec((qubits[int(a)], qubits[int(b)]), name="CNOT"))
    return gates


def _embedded(u: np.ndarray, size: int) -> np.ndarray:
    out = np.eye(1 << size, dtype=np.complex128)
    out[:u.shape[0], :u.shape[0]] = u
    return out


def _zero_diagonal_unitary(gen: np.random.Generator, d: int) -> np.ndarray:
    """Circulant unitary with zero diagonal: spectrum on the unit circle summing to zero."""
    phases = []
    rest = d
    if d % 2:
        phi = gen.uniform(0, 2 * np.pi)
        phases += [np.exp(1j * (phi + 2 * np.pi * j / 3)) for j in range(3)]
        rest -= 3
    for _ in range(rest // 2):
        phi = gen.uniform(0, 2 * np.pi)
        phases += [np.exp(1j * phi), -np.exp(1j * phi)]
    f = np.fft.fft(np.eye(d)) / np.sqrt(d)
    c = f @ np.diag(gen.permutation(phases)) @ f.conj().T
    dphase = np.diag(np.exp(1j * gen.uniform(0, 2 * np.pi, size=d)))
    return dphase @ c @ dphase.conj().T


def random_adaptive_verifier(rng, n: int = 1, p1: int = 3, k: int = 1, p2: int = 2, q: int = 1,
                             depth: int = 2) -> AdaptiveVerifier:
    """Random verifier with q <= 2 whose index measurements never repeat or leave the proof."""
    if q not in (1, 2):
        raise ValueError("random verifiers are generated for q in {1, 2}")
    gen = as_stream(rng).generator
    d = k * p2
    if q > d:
        raise ValueError(f"q={q} queries on {d} proof qubits")
    register, output, extras = _layout(n, p1, k, p2)
    work = list(range(n)) + [output] + list(extras)
    size = len(register)

    first = _random_layer(gen, work, depth)
    if size:
        controls = (0,) if n else ()
        for state in (("0", "1") if n else ("",)):
            amps = np.zeros(1 << size, dtype=np.complex128)
            amps[:d] = haar_state(d, gen)
            gate = GateSpec(register, unitary=complete_unitary(amps, gen), controls=controls, control_state=state)
            first.append(gate)
    circuits = [first]

    if q == 2:
        second = _random_layer(gen, work + ["q1"], depth)
        for state in ("0", "1"):
            u = _embedded(_zero_diagonal_unitary(gen, d), size)
            second.append(GateSpec(register, unitary=u, controls=("q1",), control_state=state))
        circuits.append(second)

    slots = [f"q{s}" for s in range(1, q + 1)]
    final_qubits = [output] + slots + list(extras[:1])
    circuits.append([GateSpec(tuple(final_qubits), unitary=random_unitary(1 << len(final_qubits), gen))])
    return AdaptiveVerifier(n, p1, k, p2, q, tuple(tuple(c) for c in circuits), register, output)


def random_psd_hamiltonian(rng, num_qubits: int, num_terms: int, locality: int = 1,
                           weighted: bool = False) -> LocalHamiltonian:
    """Random PSD terms on random supports; norms drawn in (0, 1], rescaled so ||H|| <= 1."""
    gen = as_stream(rng).generator
    subsets = list(itertools.combinations(range(num_qubits), locality))
    terms = []
    for _ in range(num_terms):
        support = subsets[int(gen.integers(len(subsets)))]
        terms.append(HamiltonianTerm(support, random_psd(1 << locality, gen, norm=float(gen.uniform(0.1, 1.0)))))
    if weighted:
        return LocalHamiltonian(num_qubits, tuple(terms), weights=tuple(gen.dirichlet(np.ones(num_terms))))
    h = LocalHamiltonian(num_qubits, tuple(terms))
    scale = max(h.norm(), 1.0)
    return LocalHamiltonian(num_qubits, tuple(HamiltonianTerm(t.support, t.matrix / scale) for t in terms))


def ghz_state(num_qubits: int) -> DensityMatrix:
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return StateVector(num_qubits, amps).density()


def ghz_marginals(num_qubits: int) -> MarginalSpec:
    rho = ghz_state(num_qubits)
    subsets = [(i, i + 1) for i in range(num_qubits - 1)]
    return MarginalSpec(tuple(subsets), tuple(partial_trace(rho, s) for s in subsets))


def product_hamiltonian(num_qubits: int) -> LocalHamiltonian:
    """H = sum_i |1><1|_i / n: ground energy 0 at |0...0>."""
    one = np.diag([0.0, 1.0]).astype(np.complex128)
    return LocalHamiltonian(num_qubits, tuple(HamiltonianTerm((i,), one / num_qubits) for i in range(num_qubits)))


def generate_fixture(family: str, params: Optional[dict] = None, rng=None) -> dict:
    """Fixture files of a named family as {filename: json object}."""
    params = dict(params or {})
    stream = as_stream(rng, f"fixture={family}")
    ints = {key: int(value) for key, value in params.items()}
    if family == "reject-always":
        return {"verifier.json": serialization.verifier_to_json(reject_always_verifier(**ints))}
    if family == "accept-always":
        return {"verifier.json": serialization.verifier_to_json(accept_always_verifier(**ints))}
    if family in ("random-q1", "random-q2"):
        q = 1 if family == "random-q1" else 2
        if ints.pop("q", q) != q:
            raise ValueError(f"family {family} fixes q={q}")
        ints.setdefault("p2", 2 if family == "random-q1" else 3)
        ints.setdefault("p1", 1 + index_register_size(ints.get("k", 1) * ints["p2"]) + 1)
        v = random_adaptive_verifier(stream, q=q, **ints)
        return {"verifier.json": serialization.verifier_to_json(v)}
    if family == "ghz-cldm":
        n = ints.get("n", 3)
        return {"state.json": serialization.density_to_json(ghz_state(n)),
                "marginals.json": serialization.marginal_spec_to_json(ghz_marginals(n))}
    if family == "product-ksep":
        n, k = ints.get("n", 2), ints.get("k", 2)
        h = product_hamiltonian(n)
        zero = DensityMatrix.basis("0" * (n // k))
        witness = honest_classical_witness(h, [zero] * k, k)
        state = DensityMatrix(n, kron_all([zero.matrix] * k))
        return {"hamiltonian.json": serialization.hamiltonian_to_json(h),
                "state.json": serialization.density_to_json(state),
                "witness.json": serialization.witness_to_json(witness)}
    raise UnknownFixtureError(f"unknown fixture family '{family}', expected one of {', '.join(FAMILIES)}")
