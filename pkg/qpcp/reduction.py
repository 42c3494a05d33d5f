from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from qpcp.circuits import (GateSpec, adjoint_circuit, apply_circuit, apply_gate, circuit_unitary,
                           register_probabilities, to_batch, to_columns, zero_batch)
from qpcp.linalg import (DensityMatrix, DimensionError, PauliWord, StateVector, as_matrix, check_qubit_cap,
                         embed_operator, hermitize, is_hermitian, min_eigenvalue, operator_norm)
from qpcp.rng import as_stream
from qpcp.utils import ProgressBar
from qpcp.verifier import AnyVerifier, evolve_path

TERM_TOLERANCE = 1e-9


class PreconditionViolation(ValueError):
    pass


@dataclass(frozen=True)
class HamiltonianTerm:
    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        if list(support) != sorted(set(support)):
            raise DimensionError(f"term support {support} must be sorted and distinct")
        m = as_matrix(self.matrix)
        dim = 1 << len(support)
        if m.shape != (dim, dim):
            raise DimensionError(f"term matrix of shape {m.shape} on support {support}")
        if not is_hermitian(m, TERM_TOLERANCE):
            raise PreconditionViolation(f"term on {support} is not Hermitian within {TERM_TOLERANCE}")
        m = hermitize(m)
        m.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class LocalHamiltonian:
    """H = sum_i w_i H_i (w_i = 1 when no weights are given) on num_qubits qubits."""
    num_qubits: int
    terms: tuple[HamiltonianTerm, ...]
    weights: Optional[tuple[float, ...]] = None
    locality: Optional[int] = None

    def __post_init__(self):
        terms = tuple(t if isinstance(t, HamiltonianTerm) else HamiltonianTerm(*t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        for t in terms:
            if t.support and t.support[-1] >= self.num_qubits:
                raise DimensionError(f"term support {t.support} outside {self.num_qubits} qubits")
        widest = max((len(t.support) for t in terms), default=0)
        if self.locality is None:
            object.__setattr__(self, "locality", widest)
        elif widest > self.locality:
            raise DimensionError(f"term of size {widest} in a {self.locality}-local Hamiltonian")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != len(terms):
                raise DimensionError(f"{len(w)} weights for {len(terms)} terms")
            if any(x < 0 for x in w) or abs(sum(w) - 1.0) > TERM_TOLERANCE:
                raise PreconditionViolation("weights must be nonnegative and sum to 1")
            object.__setattr__(self, "weights", w)

    def coefficient(self, i: int) -> float:
        return 1.0 if self.weights is None else self.weights[i]

    def term_operator(self, i: int) -> np.ndarray:
        t = self.terms[i]
        return embed_operator(t.matrix, t.support, self.num_qubits)

    def to_matrix(self) -> np.ndarray:
        check_qubit_cap(self.num_qubits)
        grouped = {}
        for i, t in enumerate(self.terms):
            grouped[t.support] = grouped.get(t.support, 0) + self.coefficient(i) * t.matrix
        dim = 1 << self.num_qubits
        out = np.zeros((dim, dim), dtype=np.complex128)
        for support, m in grouped.items():
            out += embed_operator(m, support, self.num_qubits)
        return out

    def energy(self, xi: DensityMatrix) -> float:
        if xi.num_qubits != self.num_qubits:
            raise DimensionError(f"{xi.num_qubits}-qubit state for a {self.num_qubits}-qubit Hamiltonian")
        return float(np.real(np.trace(self.to_matrix() @ xi.matrix)))

    def is_psd(self, tol: float = TERM_TOLERANCE) -> bool:
        return all(min_eigenvalue(t.matrix) >= -tol for t in self.terms)

    def max_term_norm(self) -> float:
        return max((operator_norm(t.matrix) for t in self.terms), default=0.0)

    def norm(self) -> float:
        return operator_norm(self.to_matrix())


def _basis_columns(num_qubits: int, qubits: Sequence[int]) -> np.ndarray:
    """Columns |beta on `qubits` (MSB first), 0 elsewhere> for every beta."""
    q = len(qubits)
    cols = np.zeros((1 << num_qubits, 1 << q), dtype=np.complex128)
    for beta in range(1 << q):
        idx = 0
        for pos, qb in enumerate(qubits):
            if (beta >> (q - 1 - pos)) & 1:
                idx |= 1 << (num_qubits - 1 - qb)
        cols[idx, beta] = 1.0
    return cols


def exact_hamiltonian(v: AnyVerifier, x: str) -> LocalHamiltonian:
    """H_x = sum over unordered index sets S of sum_{orderings of S} <0_AB| P_path |0_AB>.

    Each term is the reject weight restricted to the queried qubits, so
    Pr[accept] = 1 - tr[H_x xi]."""
    num_qubits, offset = v.num_qubits, v.proof_offset
    terms = []
    for subset in itertools.combinations(range(v.num_proof_qubits), v.q):
        batch = to_batch(_basis_columns(num_qubits, [offset + i for i in subset]), num_qubits)
        h = np.zeros((1 << v.q, 1 << v.q), dtype=np.complex128)
        for path in itertools.permutations(subset):
            k = to_columns(evolve_path(v, x, path, batch))
            h += k.conj().T @ k
        terms.append(HamiltonianTerm(subset, hermitize(h)))
    return LocalHamiltonian(v.num_proof_qubits, tuple(terms), locality=v.q)


def fixed_state_operator(a: np.ndarray, psi: StateVector, keep: Sequence[int]) -> np.ndarray:
    """B with b[al, al'] = <al|<psi| A |al'>|psi>, the free qubits `keep` in ascending order
    and psi on the remaining qubits (ascending)."""
    a = as_matrix(a)
    num_qubits = int(a.shape[0]).bit_length() - 1
    keep = sorted(set(keep))
    rest = [i for i in range(num_qubits) if i not in keep]
    if psi.num_qubits != len(rest):
        raise DimensionError(f"{psi.num_qubits}-qubit fixed state for {len(rest)} traced qubits")
    dim_keep = 1 << len(keep)
    iso = np.kron(np.eye(dim_keep, dtype=np.complex128), psi.amplitudes[:, None])
    order = keep + rest
    tensor = iso.reshape((2,) * num_qubits + (dim_keep,))
    tensor = np.transpose(tensor, list(np.argsort(order)) + [num_qubits])
    iso = tensor.reshape(1 << num_qubits, dim_keep)
    return iso.conj().T @ a @ iso


def projector_decomposition(q_state: str) -> list[tuple[int, PauliWord]]:
    """|q><q| = 2^-|q| sum sign * word, words over {I, Z}."""
    out = []
    for letters in itertools.product("IZ", repeat=len(q_state)):
        sign = 1
        for c, b in zip(letters, q_state):
            if c == "Z" and b == "1":
                sign = -sign
        out.append((sign, PauliWord("".join(letters))))
    return out


def _ket_unitaries(value: int, size: int, count: int) -> list[tuple[int, Optional[np.ndarray]]]:
    """`count` signed diagonal unitaries on a `size`-qubit register whose signed sum is count*|value><value|."""
    if size == 0:
        return [(1, None)]
    if count == 1 << size:
        out = []
        for sign, word in projector_decomposition(format(value, f"0{size}b")):
            diag = np.ones(1, dtype=np.complex128)
            for c in word.letters:
                diag = np.kron(diag, [1, -1] if c == "Z" else [1, 1])
            out.append((sign, None if "Z" not in word.letters else np.diag(diag)))
        return out
    omega = np.exp(2j * np.pi / count)
    x = np.arange(1 << size)
    # unused register states rotate off the target phase so their clock sum cancels
    exponents = np.where(x < count, x, (value + 1) % count)
    out = []
    for m in range(count):
        diag = omega ** ((exponents - value) * m)
        out.append((1, None if m == 0 else np.diag(diag)))
    return out


def _reflection(value: int, size: int) -> np.ndarray:
    diag = -np.ones(1 << size, dtype=np.complex128)
    diag[value] = 1.0
    return np.diag(diag)


@dataclass(frozen=True)
class UnitaryDecomposition:
    """P_{x,path} = (1/gamma) sum_j sign_j U_j with every U_j a circuit on the full register."""
    terms: tuple[tuple[int, tuple[GateSpec, ...]], ...]
    gamma: int
    num_qubits: int

    def __post_init__(self):
        if len(self.terms) != self.gamma:
            raise ValueError(f"{len(self.terms)} circuits for gamma={self.gamma}")

    def matrix(self) -> np.ndarray:
        total = sum(sign * circuit_unitary(circuit, self.num_qubits) for sign, circuit in self.terms)
        return total / self.gamma


def decomposition_size(q: int, k: int, p2: int) -> int:
    return 2 ** (q + 1) * (k * p2) ** q


def unitary_decomposition(v: AnyVerifier, x: str, path: Sequence[int]) -> UnitaryDecomposition:
    v.check_input(x)
    path = v.check_path(path)
    steps = v.steps()
    count = v.num_proof_qubits
    forward = [v.step_circuit(t, path[:t], x) for t in range(v.q)]
    final = v.resolve(v.final_circuit(), path)
    final_adj = adjoint_circuit(final)
    backward = [adjoint_circuit(c) for c in forward]

    kets = [_ket_unitaries(path[t], len(steps[t].register), count) for t in range(v.q)]
    bras = [_reflection(path[t], len(steps[t].register)) for t in range(v.q)]
    output_z = GateSpec((v.output_qubit,), name="Z")

    terms = []
    for ket_choice in itertools.product(*kets):
        for out_choice in (0, 1):
            for bra_choice in itertools.product((0, 1), repeat=v.q):
                sign = 1
                circuit = []
                for t in range(v.q):
                    circuit += forward[t]
                    ket_sign, ket = ket_choice[t]
                    sign *= ket_sign
                    if ket is not None:
                        circuit.append(GateSpec(steps[t].register, unitary=ket))
                circuit += final
                if out_choice:
                    circuit.append(output_z)
                circuit += final_adj
                for t in reversed(range(v.q)):
                    # an empty register makes the reflection the identity
                    if bra_choice[t] and steps[t].register:
                        circuit.append(GateSpec(steps[t].register, unitary=bras[t]))
                    circuit += backward[t]
                terms.append((sign, tuple(circuit)))
    return UnitaryDecomposition(tuple(terms), decomposition_size(v.q, v.k, v.p2), v.num_qubits)


def hadamard_shots(eps: float, delta: float) -> int:
    """Per-part Hoeffding count for +-1 outcomes: accuracy eps with failure at most delta/2."""
    if not 0 < eps < 1 + 1e-12 or not 0 < delta < 1:
        raise ValueError(f"eps={eps}, delta={delta} must lie in (0, 1)")
    return int(math.ceil(2 * math.log(4 / delta) / eps ** 2))


def _controlled(gate: GateSpec, state: str) -> GateSpec:
    shift = [t + 1 for t in gate.targets]
    controls = (0,) + tuple(c + 1 for c in gate.controls)
    return GateSpec(tuple(shift), name=gate.name, unitary=gate.unitary, controls=controls,
                    control_state=state + gate.control_state)


def _circuit_width(*circuits) -> int:
    return 1 + max((int(t) for c in circuits for g in c for t in g.qubits), default=-1)


def interferometer_probabilities(w_circuit, u_psi, u_phi, num_qubits: int) -> tuple[float, float]:
    """Pr[control reads 0] for the real-part and imaginary-part Hadamard tests of <psi|W|phi>."""
    batch = zero_batch(num_qubits + 1)
    batch = apply_gate(batch, GateSpec((0,), name="H"))
    batch = apply_circuit(batch, [_controlled(g, "0") for g in u_psi])
    batch = apply_circuit(batch, [_controlled(g, "1") for g in list(u_phi) + list(w_circuit)])
    h = GateSpec((0,), name="H")
    real = apply_gate(batch, h)
    imag = apply_gate(apply_gate(batch, GateSpec((0,), name="S").adjoint()), h)
    p_real = float(register_probabilities(real, [0])[0])
    p_imag = float(register_probabilities(imag, [0])[0])
    return min(max(p_real, 0.0), 1.0), min(max(p_imag, 0.0), 1.0)


def hadamard_test(w_circuit, u_psi, u_phi, eps: float, delta: float, rng, num_qubits: Optional[int] = None) -> complex:
    """Estimate <psi|W|phi> with |psi> = U_psi|0>, |phi> = U_phi|0> from sampled interferometer runs."""
    shots = hadamard_shots(eps, delta)
    if num_qubits is None:
        num_qubits = _circuit_width(w_circuit, u_psi, u_phi)
    check_qubit_cap(num_qubits + 1)
    p_real, p_imag = interferometer_probabilities(w_circuit, u_psi, u_phi, num_qubits)
    gen = as_stream(rng).generator
    re = 2 * gen.binomial(shots, p_real) / shots - 1
    im = 2 * gen.binomial(shots, p_imag) / shots - 1
    return complex(re, im)


def _state_prep(qubits: Sequence[int], value: int) -> list[GateSpec]:
    return [GateSpec((qb,), name="X") for pos, qb in enumerate(qubits) if (value >> (len(qubits) - 1 - pos)) & 1]


def _estimate_terms(v: AnyVerifier, x: str, eps_prime: float, delta_prime: float, rng) -> list[HamiltonianTerm]:
    stream = as_stream(rng)
    offset = v.proof_offset
    dim = 1 << v.q
    subsets = list(itertools.combinations(range(v.num_proof_qubits), v.q))
    gamma = decomposition_size(v.q, v.k, v.p2)
    terms = []
    with ProgressBar(len(subsets), desc="hadamard tests") as pbar:
        for s_index, subset in enumerate(subsets):
            qubits = [offset + i for i in subset]
            h = np.zeros((dim, dim), dtype=np.complex128)
            for p_index, path in enumerate(itertools.permutations(subset)):
                decomposition = unitary_decomposition(v, x, path)
                for alpha in range(dim):
                    for beta in range(dim):
                        u_psi = _state_prep(qubits, alpha)
                        u_phi = _state_prep(qubits, beta)
                        for j, (sign, circuit) in enumerate(decomposition.terms):
                            label = f"hadamard/term={s_index}/perm={p_index}/alpha={alpha}/beta={beta}/j={j}"
                            z = hadamard_test(circuit, u_psi, u_phi, eps_prime, delta_prime, stream.child(label),
                                              num_qubits=v.num_qubits)
                            h[alpha, beta] += sign * z
            terms.append((subset, h / gamma))
            pbar.update(1)
    return terms


def _finish(raw_terms, num_qubits: int, q: int) -> LocalHamiltonian:
    terms = []
    for subset, h in raw_terms:
        h = hermitize(h)
        lam = min_eigenvalue(h)
        if lam < 0:
            h = h - lam * np.eye(h.shape[0])
        terms.append(HamiltonianTerm(subset, h))
    ham = LocalHamiltonian(num_qubits, tuple(terms), locality=q)
    scale = max(ham.norm(), 1.0)
    if scale > 1.0:
        ham = LocalHamiltonian(num_qubits, tuple(HamiltonianTerm(t.support, t.matrix / scale) for t in terms), locality=q)
    return ham


def learning_parameters(v: AnyVerifier, eps: float, delta: float) -> dict:
    num_sets = math.comb(v.num_proof_qubits, v.q)
    gamma = decomposition_size(v.q, v.k, v.p2)
    fact = math.factorial(v.q)
    return {
        "num_sets": num_sets,
        "gamma": gamma,
        "eps_prime": eps / (num_sets * 2 ** (v.q + 4) * fact),
        "delta_prime": delta / (num_sets * fact * 4 ** (v.q + 1) * gamma),
    }


def learn_hamiltonian(v: AnyVerifier, x: str, eps: float, delta: float, rng) -> LocalHamiltonian:
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ValueError(f"eps={eps}, delta={delta} must lie in (0, 1)")
    params = learning_parameters(v, eps, delta)
    logging.info(f"learning Hamiltonian: gamma={params['gamma']} eps'={params['eps_prime']:.3e} "
                 f"delta'={params['delta_prime']:.3e} shots={hadamard_shots(params['eps_prime'], params['delta_prime'])}")
    raw = _estimate_terms(v, x, params["eps_prime"], params["delta_prime"], rng)
    return _finish(raw, v.num_proof_qubits, v.q)


def grid_quantize(value, eta: int):
    """Nearest of the 2^(eta-1)+1 evenly spaced points of [-1, 1]; ties go toward -1.

    Real and imaginary parts are quantized separately."""
    if eta < 1:
        raise ValueError("eta must be at least 1")
    value = np.asarray(value)
    step = 2.0 ** (2 - eta)
    top = 2 ** (eta - 1)

    def q(part):
        k = np.clip(np.ceil((part + 1.0) / step - 0.5), 0, top)
        return -1.0 + k * step

    if np.iscomplexobj(value):
        return q(value.real) + 1j * q(value.imag)
    return q(value)


def rounding_accuracy(eta: int, num_sets: int, q: int) -> float:
    return 4 * num_sets * 2 ** (q + 4) * math.factorial(q) / (2 ** eta + 1)


def rounding_bits(num_sets: int, q: int, eps: float) -> int:
    return int(math.ceil(math.log2(4 * num_sets * 2 ** (q + 4) * math.factorial(q) / eps - 1)))


def protocol_eta(q: int, k: int, p2: int, eps: float) -> int:
    g = (q + 1) * 2 * k * p2
    return int(math.ceil(q * math.log2(4 * g * (g + 1) / eps - 1)))


def learn_hamiltonian_rounded(v: AnyVerifier, x: str, eta: int, delta: float, rng) -> LocalHamiltonian:
    """Learning at accuracy 2/(2^eta+1) per test, then every term entry snapped to the eta-bit grid,
    so independent successful runs agree exactly."""
    if eta < 1:
        raise ValueError("eta must be at least 1")
    if not 0 < delta < 1:
        raise ValueError(f"delta={delta} must lie in (0, 1)")
    params = learning_parameters(v, 1.0, delta)
    eps_prime = 2 / (2 ** eta + 1)
    logging.info(f"rounded learning: eta={eta} eps'={eps_prime:.3e} delta'={params['delta_prime']:.3e} "
                 f"accuracy={rounding_accuracy(eta, params['num_sets'], v.q):.3e}")
    raw = _estimate_terms(v, x, eps_prime, params["delta_prime"], rng)
    quantized = [(subset, grid_quantize(h, eta)) for subset, h in raw]
    return _finish(quantized, v.num_proof_qubits, v.q)
