import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpcp import fixtures
from qpcp.linalg import DensityMatrix, DimensionError, pauli_matrix, random_density_matrix, trace_distance
from qpcp.rng import RandomStream
from qpcp.tomography import (MarginalSpec, audit_covering_set, build_covering_set, cldm_copy_count, cldm_decide,
                             cldm_distances, estimate_marginals, marginal_shot_count, pauli_expectation,
                             pauli_words, project_to_covering, reconstruct_from_coefficients)

seeds = st.integers(min_value=0, max_value=2 ** 32)


def test_pauli_words():
    assert [str(w) for w in pauli_words(1)] == ["I", "X", "Y", "Z"]
    assert len(pauli_words(2)) == 16


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_exact_coefficients_reconstruct_the_state(seed):
    rho = random_density_matrix(2, RandomStream(seed).generator)
    coefficients = [np.trace(pauli_matrix(w) @ rho.matrix).real for w in pauli_words(2)]
    np.testing.assert_allclose(reconstruct_from_coefficients(coefficients, 2), rho.matrix, atol=1e-12)


def test_reconstruct_checks_length():
    with pytest.raises(DimensionError):
        reconstruct_from_coefficients([1.0, 0.0], 1)


def test_pauli_expectation_of_eigenstate_is_exact(stream):
    from qpcp.linalg import PauliWord
    assert pauli_expectation(DensityMatrix.basis("1"), PauliWord("Z"), 100, stream) == -1.0
    with pytest.raises(DimensionError):
        pauli_expectation(DensityMatrix.basis("1"), PauliWord("ZZ"), 100, stream)


def test_marginal_shot_count():
    assert marginal_shot_count(2, 1, 0.5, 0.5) == 355
    assert marginal_shot_count(4, 2, 0.1, 0.1) > marginal_shot_count(4, 2, 0.2, 0.1)
    with pytest.raises(ValueError):
        marginal_shot_count(2, 1, 0.0, 0.5)


class TestEstimation:
    def test_ghz_marginals_within_eps(self, stream):
        spec = fixtures.ghz_marginals(3)
        estimates = estimate_marginals(fixtures.ghz_state(3), spec.subsets, 0.2, 0.1, stream)
        assert max(cldm_distances(estimates, spec.targets)) <= 0.2
        for e in estimates:
            assert np.trace(e).real == pytest.approx(1.0)
            np.testing.assert_allclose(e, e.conj().T)

    def test_seeded(self):
        rho = fixtures.ghz_state(3)
        a = estimate_marginals(rho, [(0, 2)], 0.3, 0.2, RandomStream(5))
        b = estimate_marginals(rho, [(2, 0)], 0.3, 0.2, RandomStream(5))
        np.testing.assert_array_equal(a[0], b[0])

    def test_decide(self, stream):
        spec = fixtures.ghz_marginals(3)
        estimates = estimate_marginals(fixtures.ghz_state(3), spec.subsets, 0.2, 0.1, stream)
        assert cldm_decide(estimates, spec.targets, 0.0, 0.2)
        mixed = [DensityMatrix.maximally_mixed(2)] * 2
        assert not cldm_decide(estimates, mixed, 0.0, 0.2)
        # the GHZ pair marginal is at trace norm 1 from the maximally mixed state
        assert cldm_decide(estimates, mixed, 1.0, 0.2)

    def test_distances_check_shapes(self):
        with pytest.raises(DimensionError):
            cldm_distances([np.eye(2) / 2], [DensityMatrix.maximally_mixed(2)])
        with pytest.raises(DimensionError):
            cldm_distances([], [DensityMatrix.maximally_mixed(1)])


def test_marginal_spec_targets_must_match():
    with pytest.raises(DimensionError):
        MarginalSpec(((0, 1),), (DensityMatrix.maximally_mixed(1),))
    with pytest.raises(DimensionError):
        MarginalSpec(((0,), (1,)), (DensityMatrix.maximally_mixed(1),))
    assert MarginalSpec(((1, 0, 1),)).subsets == ((0, 1),)


def test_copy_count():
    l, k = cldm_copy_count(2, 2, 0.2, 0.1, 3)
    assert l > 0
    assert k == pytest.approx((2 * l * 0.01 + l * l * 3 * np.log(2)) / 0.02)
    assert cldm_copy_count(2, 2, 0.2, 0.1, 3, constant=32)[0] >= 2 * l - 1


class TestCoveringSet:
    def test_members_are_separated_and_cover(self):
        cs = build_covering_set(1, 0.5, RandomStream(21), patience=200)
        assert len(cs.members) >= 2
        for i, a in enumerate(cs.members):
            for b in cs.members[i + 1:]:
                assert trace_distance(a, b) > 0.5
        audit = audit_covering_set(cs, 100, RandomStream(22))
        assert audit["samples"] == 100
        assert audit["fraction"] >= 0.9

    def test_project(self):
        cs = build_covering_set(1, 0.5, RandomStream(21), patience=50)
        member = cs.members[-1]
        assert project_to_covering(member, cs) is member
        with pytest.raises(DimensionError):
            project_to_covering(DensityMatrix.maximally_mixed(2), cs)

    def test_limits(self):
        with pytest.raises(DimensionError):
            build_covering_set(3, 0.5, RandomStream(0))
        with pytest.raises(ValueError):
            build_covering_set(1, 0.0, RandomStream(0))
