import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpcp import fixtures
from qpcp.circuits import GateSpec
from qpcp.linalg import PAULI, DensityMatrix, DimensionError, StateVector, operator_norm, random_density_matrix
from qpcp.reduction import (HamiltonianTerm, LocalHamiltonian, PreconditionViolation, decomposition_size,
                            exact_hamiltonian, fixed_state_operator, grid_quantize, hadamard_shots, hadamard_test,
                            interferometer_probabilities, learn_hamiltonian, learn_hamiltonian_rounded,
                            learning_parameters, projector_decomposition, protocol_eta, rounding_accuracy,
                            rounding_bits, unitary_decomposition)
from qpcp.rng import RandomStream
from qpcp.verifier import accept_probability_exact, path_operator

seeds = st.integers(min_value=0, max_value=2 ** 32)


class TestLocalHamiltonian:
    def test_term_must_be_hermitian(self):
        with pytest.raises(PreconditionViolation):
            HamiltonianTerm((0,), np.array([[0, 1], [0, 0]]))

    def test_support_sorted(self):
        with pytest.raises(DimensionError):
            HamiltonianTerm((1, 0), np.eye(4))
        with pytest.raises(DimensionError):
            HamiltonianTerm((0,), np.eye(4))

    def test_weights_sum_to_one(self):
        term = HamiltonianTerm((0,), np.eye(2))
        with pytest.raises(PreconditionViolation):
            LocalHamiltonian(1, (term, term), weights=(0.5, 0.6))
        with pytest.raises(DimensionError):
            LocalHamiltonian(1, (term, term), weights=(1.0,))

    def test_locality(self):
        term = HamiltonianTerm((0, 1), np.eye(4))
        assert LocalHamiltonian(3, (term,)).locality == 2
        with pytest.raises(DimensionError):
            LocalHamiltonian(3, (term,), locality=1)
        with pytest.raises(DimensionError):
            LocalHamiltonian(1, (term,))

    def test_matrix_and_energy(self):
        one = np.diag([0.0, 1.0])
        h = LocalHamiltonian(2, (HamiltonianTerm((0,), one), HamiltonianTerm((1,), one)), weights=(0.25, 0.75))
        np.testing.assert_allclose(np.diag(h.to_matrix()).real, [0, 0.75, 0.25, 1.0])
        assert h.energy(DensityMatrix.basis("01")) == pytest.approx(0.75)
        assert h.norm() == pytest.approx(1.0)
        assert h.is_psd()


def test_exact_hamiltonian_of_copy_qubit():
    h = exact_hamiltonian(fixtures.copy_qubit_verifier(), "")
    assert [t.support for t in h.terms] == [(0,), (1,)]
    np.testing.assert_allclose(h.terms[0].matrix, np.diag([1, 0]), atol=1e-12)
    np.testing.assert_allclose(h.terms[1].matrix, np.zeros((2, 2)), atol=1e-12)


def test_exact_hamiltonian_of_reject_always_is_identity_energy(stream):
    h = exact_hamiltonian(fixtures.reject_always_verifier(), "")
    assert h.energy(random_density_matrix(2, stream.generator)) == pytest.approx(1.0)


@settings(max_examples=10, deadline=None)
@given(seeds, st.sampled_from(["0", "1"]))
def test_energy_identity_q1(seed, x):
    stream = RandomStream(seed)
    v = fixtures.random_adaptive_verifier(stream.child("verifier"), n=1, p1=3, q=1)
    h = exact_hamiltonian(v, x)
    assert h.locality == 1
    assert len(h.terms) == math.comb(v.num_proof_qubits, v.q)
    for i in range(3):
        xi = random_density_matrix(v.num_proof_qubits, stream.child(f"proof={i}").generator)
        assert accept_probability_exact(v, x, xi) == pytest.approx(1 - h.energy(xi), abs=1e-9)


@pytest.mark.slow
@settings(max_examples=5, deadline=None)
@given(seeds)
def test_energy_identity_q2(seed):
    stream = RandomStream(seed)
    v = fixtures.random_adaptive_verifier(stream.child("verifier"), n=1, p1=4, p2=3, q=2)
    h = exact_hamiltonian(v, "1")
    assert h.locality == 2
    assert h.is_psd()
    for i in range(3):
        xi = random_density_matrix(3, stream.child(f"proof={i}").generator)
        assert accept_probability_exact(v, "1", xi) == pytest.approx(1 - h.energy(xi), abs=1e-9)


def test_fixed_state_operator():
    a = np.kron(PAULI["X"], PAULI["Z"])
    np.testing.assert_allclose(fixed_state_operator(a, StateVector.basis("0"), [0]), PAULI["X"], atol=1e-12)
    plus = StateVector(1, np.array([1, 1]) / np.sqrt(2))
    np.testing.assert_allclose(fixed_state_operator(a, plus, [1]), PAULI["Z"], atol=1e-12)
    with pytest.raises(DimensionError):
        fixed_state_operator(a, StateVector.basis("00"), [0])


@pytest.mark.parametrize("bits", ["0", "1", "01", "110"])
def test_projector_decomposition(bits):
    from qpcp.linalg import pauli_matrix
    total = sum(sign * pauli_matrix(word) for sign, word in projector_decomposition(bits)) / 2 ** len(bits)
    expected = DensityMatrix.basis(bits).matrix
    np.testing.assert_allclose(total, expected, atol=1e-12)


class TestUnitaryDecomposition:
    def test_size(self):
        assert decomposition_size(1, 1, 2) == 8
        assert decomposition_size(2, 1, 3) == 72
        dec = unitary_decomposition(fixtures.copy_qubit_verifier(), "", (0,))
        assert dec.gamma == 8 and len(dec.terms) == 8

    def test_matches_path_operator_copy_qubit(self):
        v = fixtures.copy_qubit_verifier()
        for path in ((0,), (1,)):
            np.testing.assert_allclose(unitary_decomposition(v, "", path).matrix(), path_operator(v, "", path),
                                       atol=1e-10)

    def test_matches_path_operator_random(self, stream):
        v = fixtures.random_adaptive_verifier(stream, n=1, p1=3, q=1)
        for path in ((0,), (1,)):
            np.testing.assert_allclose(unitary_decomposition(v, "0", path).matrix(), path_operator(v, "0", path),
                                       atol=1e-10)

    def test_index_register_not_a_power_of_two(self):
        v = fixtures.copy_qubit_verifier(p2=3, position=2)
        np.testing.assert_allclose(unitary_decomposition(v, "", (2,)).matrix(), path_operator(v, "", (2,)),
                                   atol=1e-10)

    def test_single_proof_qubit(self):
        v = fixtures.biased_nonadaptive_verifier(0.3, 0.6)
        np.testing.assert_allclose(unitary_decomposition(v, "", (0,)).matrix(), path_operator(v, "", (0,)),
                                   atol=1e-10)


class TestHadamardTest:
    def test_shots(self):
        assert hadamard_shots(0.1, 0.2) == 600
        with pytest.raises(ValueError):
            hadamard_shots(0.1, 1.0)

    def test_interferometer_probabilities(self):
        flip = [GateSpec((0,), name="X")]
        p_real, p_imag = interferometer_probabilities([GateSpec((0,), name="S")], flip, flip, 1)
        assert p_real == pytest.approx(0.5)
        assert p_imag == pytest.approx(1.0)
        p_real, p_imag = interferometer_probabilities([], [], [], 1)
        assert p_real == pytest.approx(1.0)
        assert p_imag == pytest.approx(0.5)

    def test_estimate(self, stream):
        flip = [GateSpec((0,), name="X")]
        z = hadamard_test([GateSpec((0,), name="S")], flip, flip, 0.1, 0.01, stream)
        assert abs(z - 1j) <= 0.1

    def test_estimate_is_seeded(self):
        h = [GateSpec((0,), name="H")]
        a = hadamard_test(h, [], [], 0.2, 0.1, RandomStream(4, "t"))
        b = hadamard_test(h, [], [], 0.2, 0.1, RandomStream(4, "t"))
        assert a == b


class TestLearning:
    def test_parameters(self):
        params = learning_parameters(fixtures.copy_qubit_verifier(), 0.1, 0.2)
        assert params["num_sets"] == 2
        assert params["gamma"] == 8
        assert params["eps_prime"] == pytest.approx(0.1 / 64)
        assert params["delta_prime"] == pytest.approx(0.2 / 256)

    def test_learned_hamiltonian_is_close(self, stream):
        v = fixtures.copy_qubit_verifier()
        learned = learn_hamiltonian(v, "", 0.5, 0.5, stream)
        exact = exact_hamiltonian(v, "")
        assert operator_norm(learned.to_matrix() - exact.to_matrix()) <= 0.5
        assert learned.is_psd()
        assert learned.norm() <= 1 + 1e-9
        assert [t.support for t in learned.terms] == [t.support for t in exact.terms]

    @pytest.mark.slow
    def test_random_verifiers_are_learned(self):
        close = 0
        for i in range(20):
            stream = RandomStream(100 + i)
            v = fixtures.random_adaptive_verifier(stream.child("verifier"), n=1, p1=3, q=1)
            learned = learn_hamiltonian(v, "1", 0.1, 0.2, stream.child("learn"))
            exact = exact_hamiltonian(v, "1")
            close += operator_norm(learned.to_matrix() - exact.to_matrix()) <= 0.1
        assert close >= 14

    def test_bad_accuracy(self, stream):
        with pytest.raises(ValueError):
            learn_hamiltonian(fixtures.copy_qubit_verifier(), "", 1.5, 0.5, stream)

    def test_rounded_learning_agrees_across_seeds(self):
        v = fixtures.copy_qubit_verifier()
        exact = exact_hamiltonian(v, "")
        first = learn_hamiltonian_rounded(v, "", 4, 0.2, RandomStream(1))
        second = learn_hamiltonian_rounded(v, "", 4, 0.2, RandomStream(2))
        for a, b, e in zip(first.terms, second.terms, exact.terms):
            np.testing.assert_array_equal(a.matrix, b.matrix)
            np.testing.assert_allclose(a.matrix, e.matrix, atol=1e-12)


class TestRounding:
    @pytest.mark.parametrize("value,expected", [(0.4, 0.0), (0.5, 0.0), (0.6, 1.0), (-0.5, -1.0), (3.0, 1.0),
                                                (-7.0, -1.0)])
    def test_grid_quantize(self, value, expected):
        assert grid_quantize(value, 2) == expected

    def test_complex_parts_separately(self):
        assert grid_quantize(np.array([0.6 - 0.6j]), 2)[0] == 1 - 1j

    def test_grid_points_are_fixed(self):
        points = -1 + np.arange(2 ** 5 + 1) * 2.0 ** (2 - 6)
        np.testing.assert_array_equal(grid_quantize(points, 6), points)

    def test_eta_must_be_positive(self):
        with pytest.raises(ValueError):
            grid_quantize(0.0, 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=1, max_value=20), st.integers(min_value=1, max_value=3),
           st.floats(min_value=1e-3, max_value=0.5))
    def test_rounding_bits_reach_accuracy(self, num_sets, q, eps):
        eta = rounding_bits(num_sets, q, eps)
        assert rounding_accuracy(eta, num_sets, q) <= eps * (1 + 1e-9)

    def test_protocol_eta(self):
        assert protocol_eta(1, 1, 2, 1 / 12) == 12
