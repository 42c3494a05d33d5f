import collections
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpcp import fixtures
from qpcp.circuits import GateSpec
from qpcp.linalg import DensityMatrix, DimensionError, random_density_matrix
from qpcp.rng import RandomStream
from qpcp.verifier import (AdaptiveVerifier, MalformedPathError, NonAdaptiveVerifier, QueryPath, RepeatedVerifier,
                           VerifierStructureError, accept_operator, accept_probability_exact, index_register_size,
                           parallel_repeat, path_distribution, path_operator, repetition_count, sample_run)

seeds = st.integers(min_value=0, max_value=2 ** 32)


@pytest.mark.parametrize("proof_qubits,size", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3)])
def test_index_register_size(proof_qubits, size):
    assert index_register_size(proof_qubits) == size


def test_constant_verifiers(stream):
    xi = random_density_matrix(2, stream.generator)
    assert accept_probability_exact(fixtures.accept_always_verifier(), "", xi) == pytest.approx(1.0)
    assert accept_probability_exact(fixtures.reject_always_verifier(), "", xi) == pytest.approx(0.0)


def test_copy_qubit_reads_the_queried_qubit():
    v = fixtures.copy_qubit_verifier()
    assert accept_probability_exact(v, "", DensityMatrix.basis("10")) == pytest.approx(1.0)
    assert accept_probability_exact(v, "", DensityMatrix.basis("01")) == pytest.approx(0.0)
    mixed = DensityMatrix(2, np.diag([0.3, 0.0, 0.7, 0.0]))
    assert accept_probability_exact(v, "", mixed) == pytest.approx(0.7)
    assert path_distribution(v, "", mixed) == pytest.approx({(0,): 1.0})


def test_adaptive_walk_queries_distinct_indices():
    v = fixtures.constant_verifier(True, q=2)
    dist = path_distribution(v, "", DensityMatrix.maximally_mixed(2))
    assert dist == pytest.approx({(0, 1): 1.0})


def test_biased_nonadaptive_verifier():
    v = fixtures.biased_nonadaptive_verifier(0.9, 0.2)
    assert not v.adaptive
    assert accept_probability_exact(v, "", DensityMatrix.basis("1")) == pytest.approx(0.9)
    assert accept_probability_exact(v, "", DensityMatrix.basis("0")) == pytest.approx(0.2)


def test_proof_index():
    v = fixtures.reject_always_verifier(k=2, p2=2, p1=3)
    assert v.proof_index(2, 1) == 3
    with pytest.raises(MalformedPathError):
        v.proof_index(3, 0)


def test_proof_of_wrong_size():
    with pytest.raises(DimensionError):
        accept_probability_exact(fixtures.copy_qubit_verifier(), "", DensityMatrix.basis("1"))


def test_input_must_match_n():
    v = fixtures.random_adaptive_verifier(3, n=1)
    with pytest.raises(ValueError):
        accept_probability_exact(v, "", DensityMatrix.maximally_mixed(2))


class TestStructure:
    def test_circuit_count_must_be_q_plus_one(self):
        with pytest.raises(VerifierStructureError):
            AdaptiveVerifier(0, 2, 1, 2, 1, ((),), (0,), 1)

    def test_output_qubit_must_be_an_ancilla(self):
        with pytest.raises(VerifierStructureError):
            AdaptiveVerifier(0, 2, 1, 2, 1, ((), ()), (0,), 2)

    def test_proof_qubits_only_through_slots(self):
        with pytest.raises(VerifierStructureError):
            AdaptiveVerifier(0, 2, 1, 2, 1, ((), (GateSpec((2,), name="X"),)), (0,), 1)

    def test_slot_used_before_query(self):
        with pytest.raises(VerifierStructureError):
            AdaptiveVerifier(0, 2, 1, 2, 1, ((GateSpec(("q1",), name="X"),), ()), (0,), 1)

    def test_index_register_width(self):
        with pytest.raises(VerifierStructureError):
            AdaptiveVerifier(0, 3, 1, 2, 1, ((), ()), (0, 1), 2)

    def test_overlapping_index_registers(self):
        with pytest.raises(VerifierStructureError):
            NonAdaptiveVerifier(0, 2, 1, 2, 2, (), (), ((0,), (0,)), 1)

    def test_too_many_queries(self):
        with pytest.raises(VerifierStructureError):
            AdaptiveVerifier(0, 2, 1, 1, 2, ((), (), ()), (), 1)


def test_index_outside_proof_is_rejected():
    # two index qubits address four values, the proof has three qubits
    v = AdaptiveVerifier(0, 3, 1, 3, 1, ((GateSpec((0,), name="X"), GateSpec((1,), name="X")), ()), (0, 1), 2)
    with pytest.raises(VerifierStructureError):
        accept_probability_exact(v, "", DensityMatrix.maximally_mixed(3))


def test_repeated_index_is_rejected():
    v = AdaptiveVerifier(0, 2, 1, 2, 2, ((), (), ()), (0,), 1)
    with pytest.raises(VerifierStructureError):
        accept_probability_exact(v, "", DensityMatrix.maximally_mixed(2))


def test_query_path_validation():
    with pytest.raises(MalformedPathError):
        QueryPath((1, 1), 0.5)
    with pytest.raises(MalformedPathError):
        QueryPath((0,), 1.5)
    v = fixtures.constant_verifier(False, q=2)
    for path in ((0,), (0, 0), (0, 2)):
        with pytest.raises(MalformedPathError):
            v.check_path(path)


def test_sample_run_is_seeded():
    v = fixtures.copy_qubit_verifier()
    xi = DensityMatrix(2, np.diag([0.5, 0.0, 0.5, 0.0]))
    first = [sample_run(v, "", xi, RandomStream(3).child(f"shot={i}")) for i in range(50)]
    again = [sample_run(v, "", xi, RandomStream(3).child(f"shot={i}")) for i in range(50)]
    assert first == again


def test_sample_run_matches_exact_probability():
    v = fixtures.copy_qubit_verifier()
    xi = DensityMatrix(2, np.diag([0.5, 0.0, 0.5, 0.0]))
    stream = RandomStream(11)
    runs = [sample_run(v, "", xi, stream.child(f"shot={i}")) for i in range(1000)]
    assert all(path.indices == (0,) and path.probability == pytest.approx(1.0) for path, _ in runs)
    assert abs(sum(bit for _, bit in runs) / 1000 - 0.5) < 0.07


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_random_verifier_paths_are_a_distribution(seed):
    stream = RandomStream(seed)
    v = fixtures.random_adaptive_verifier(stream.child("verifier"), n=1, p1=3, q=1)
    xi = random_density_matrix(v.num_proof_qubits, stream.child("proof").generator)
    dist = path_distribution(v, "1", xi)
    assert sum(dist.values()) == pytest.approx(1.0)
    assert 0.0 <= accept_probability_exact(v, "1", xi) <= 1.0


class TestRepetition:
    def test_required_accepts(self):
        assert RepeatedVerifier(fixtures.copy_qubit_verifier(), 5, 0.75).required_accepts == 4
        assert RepeatedVerifier(fixtures.copy_qubit_verifier(), 3, 2 / 3).required_accepts == 2

    def test_tail_probability(self):
        r = parallel_repeat(fixtures.copy_qubit_verifier(), 3, 0.5)
        assert r.acceptance([0.5, 0.5, 0.5]) == pytest.approx(0.5)
        assert r.acceptance([1.0, 1.0, 0.0]) == pytest.approx(1.0)
        assert r.q == 3

    def test_exact_on_copies(self):
        r = parallel_repeat(fixtures.copy_qubit_verifier(), 3, 0.5)
        proofs = [DensityMatrix.basis("10"), DensityMatrix.basis("10"), DensityMatrix.basis("00")]
        assert accept_probability_exact(r, "", proofs) == pytest.approx(1.0)
        with pytest.raises(DimensionError):
            accept_probability_exact(r, "", proofs[:2])

    def test_sampled_repetition_reports_combined_path(self):
        r = parallel_repeat(fixtures.copy_qubit_verifier(), 2, 0.5)
        path, bit = sample_run(r, "", DensityMatrix.basis("10"), RandomStream(1))
        assert path.indices == (0, 2)
        assert bit == 1

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            RepeatedVerifier(fixtures.copy_qubit_verifier(), 0, 0.5)
        with pytest.raises(ValueError):
            RepeatedVerifier(fixtures.copy_qubit_verifier(), 3, 1.5)
        with pytest.raises(ValueError):
            RepeatedVerifier(fixtures.copy_qubit_verifier(), 3, 0.0)
        assert RepeatedVerifier(fixtures.copy_qubit_verifier(), 3, 1.0).required_accepts == 3

    def test_repetition_count(self):
        assert repetition_count(2 / 3, 1 / 3, 1) == 13
        assert repetition_count(1.0, 0.0, 1) == 2
        assert repetition_count(0.55, 0.45, 3) == 416
        with pytest.raises(ValueError):
            repetition_count(0.4, 0.5, 1)

    def test_single_copy_majority_is_the_base_verifier(self, stream):
        v = fixtures.biased_nonadaptive_verifier(0.9, 0.2)
        xi = random_density_matrix(1, stream.generator)
        assert accept_probability_exact(parallel_repeat(v, 1, 0.5), "", xi) == \
            pytest.approx(accept_probability_exact(v, "", xi))

    def test_thirteen_copies_amplify(self):
        r = parallel_repeat(fixtures.biased_nonadaptive_verifier(0.9, 0.2), 13, 0.5)
        assert accept_probability_exact(r, "", DensityMatrix.basis("1")) >= 0.99
        assert r.acceptance([0.9] * 13) >= 0.99


def _initial_state(v, xi):
    zero = np.zeros((1 << v.proof_offset, 1 << v.proof_offset), dtype=np.complex128)
    zero[0, 0] = 1
    return np.kron(zero, xi.matrix)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_acceptance_is_one_minus_path_rejections(seed):
    stream = RandomStream(seed)
    v = fixtures.random_adaptive_verifier(stream.child("verifier"), n=1, p1=3, q=1)
    xi = random_density_matrix(v.num_proof_qubits, stream.child("proof").generator)
    rho = _initial_state(v, xi)
    rejected = sum(np.trace(path_operator(v, "1", path) @ rho).real
                   for path in itertools.permutations(range(v.num_proof_qubits), v.q))
    accept = accept_probability_exact(v, "1", xi)
    assert accept == pytest.approx(1 - rejected, abs=1e-9)
    assert np.trace(accept_operator(v, "1") @ xi.matrix).real == pytest.approx(accept, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(seeds, st.floats(min_value=0.0, max_value=1.0))
def test_acceptance_is_linear_in_the_proof(seed, weight):
    stream = RandomStream(seed)
    v = fixtures.random_adaptive_verifier(stream.child("verifier"), n=1, p1=3, q=1)
    first = random_density_matrix(v.num_proof_qubits, stream.child("first").generator)
    second = random_density_matrix(v.num_proof_qubits, stream.child("second").generator)
    mixed = DensityMatrix(v.num_proof_qubits, weight * first.matrix + (1 - weight) * second.matrix)
    expected = weight * accept_probability_exact(v, "1", first) + (1 - weight) * accept_probability_exact(v, "1", second)
    assert accept_probability_exact(v, "1", mixed) == pytest.approx(expected, abs=1e-9)


def test_accept_operator_of_constant_verifiers():
    np.testing.assert_allclose(accept_operator(fixtures.accept_always_verifier(), ""), np.eye(4), atol=1e-12)
    np.testing.assert_allclose(accept_operator(fixtures.reject_always_verifier(), ""), np.zeros((4, 4)), atol=1e-12)
    np.testing.assert_allclose(accept_operator(fixtures.copy_qubit_verifier(), ""), np.diag([0, 0, 1, 1]), atol=1e-12)


@pytest.mark.slow
def test_sampled_histogram_matches_exact_branching():
    stream = RandomStream(17)
    v = fixtures.random_adaptive_verifier(stream.child("verifier"), n=1, p1=3, q=1)
    xi = random_density_matrix(v.num_proof_qubits, stream.child("proof").generator)
    shots = 10 ** 4
    runs = [sample_run(v, "1", xi, stream.child(f"shot={i}")) for i in range(shots)]
    counts = collections.Counter(path.indices for path, _ in runs)
    for path, p in path_distribution(v, "1", xi).items():
        assert abs(counts[path] / shots - p) <= 3 * math.sqrt(p * (1 - p) / shots) + 1e-12
    p = accept_probability_exact(v, "1", xi)
    assert abs(sum(bit for _, bit in runs) / shots - p) <= 3 * math.sqrt(p * (1 - p) / shots) + 1e-12

    coin = fixtures.hadamard_output_verifier()
    flips = [sample_run(coin, "", DensityMatrix.basis("00"), stream.child(f"flip={i}"))[1] for i in range(shots)]
    assert 0.48 <= sum(flips) / shots <= 0.52
