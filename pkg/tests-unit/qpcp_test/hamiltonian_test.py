import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpcp import fixtures, serialization
from qpcp.hamiltonian import (energy_unitary, ground_energy, ground_state, kitaev_verifier, perturb_weighted,
                              sample_count, sample_terms, sampling_failure_bound, smooth, split_count,
                              weighted_error_check)
from qpcp.linalg import DensityMatrix, operator_norm, random_density_matrix
from qpcp.reduction import HamiltonianTerm, LocalHamiltonian, PreconditionViolation
from qpcp.rng import RandomStream
from qpcp.verifier import accept_probability_exact, path_distribution

seeds = st.integers(min_value=0, max_value=2 ** 32)

ONE = np.diag([0.0, 1.0]).astype(np.complex128)


def load_hamiltonian(fixtures_dir, name):
    return serialization.hamiltonian_from_json(serialization.read_json(os.path.join(fixtures_dir, name)))


def heavy_hamiltonian():
    """One term carrying weight 0.61 among 39 light ones: smoothing has to split it."""
    terms = [HamiltonianTerm((0,), ONE)] + [HamiltonianTerm((i % 3,), ONE) for i in range(1, 40)]
    return LocalHamiltonian(3, tuple(terms), weights=(0.61,) + (0.01,) * 39)


def test_ground_energy_and_state():
    h = fixtures.product_hamiltonian(2)
    assert ground_energy(h) == pytest.approx(0.0, abs=1e-12)
    energy, vector = ground_state(h)
    assert energy == pytest.approx(0.0, abs=1e-12)
    assert abs(vector[0]) == pytest.approx(1.0)


def test_split_count():
    assert split_count(0.038125, 40) == 2
    assert split_count(0.025, 40) == 1
    assert split_count(0.5 / 40, 40) == 0


class TestSmooth:
    def test_identity_and_term_bounds(self):
        h = heavy_hamiltonian()
        smoothed = smooth(h)
        assert len(smoothed.terms) == 40
        assert smoothed.weights == pytest.approx((1 / 40,) * 40)
        np.testing.assert_allclose(smoothed.to_matrix() * 16, h.to_matrix(), atol=1e-10)
        for t in smoothed.terms:
            w = np.linalg.eigvalsh(t.matrix)
            assert w[0] >= -1e-10 and w[-1] <= 1 + 1e-10

    def test_heavy_term_is_split(self):
        smoothed = smooth(heavy_hamiltonian())
        # unsplit, the heavy term would be 40 * 0.61 / 16 = 1.525
        assert operator_norm(smoothed.terms[0].matrix) == pytest.approx(0.525)
        assert smoothed.terms[1].support == (0, 1)
        assert smoothed.terms[2].support == (0, 2)
        assert smoothed.terms[3].support == (0,)

    def test_without_heavy_terms(self):
        h = fixtures.product_hamiltonian(3)
        smoothed = smooth(h)
        np.testing.assert_allclose(smoothed.to_matrix() * 16, h.to_matrix(), atol=1e-12)
        assert [t.support for t in smoothed.terms] == [t.support for t in h.terms]

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_random_weighted(self, seed):
        h = fixtures.random_psd_hamiltonian(seed, 3, 12, locality=2, weighted=True)
        smoothed = smooth(h)
        np.testing.assert_allclose(smoothed.to_matrix() * 32, h.to_matrix(), atol=1e-10)
        assert smoothed.max_term_norm() <= 1 + 1e-10
        np.testing.assert_allclose(np.linalg.eigvalsh(smoothed.to_matrix()) * 32, np.linalg.eigvalsh(h.to_matrix()),
                                   atol=1e-10)

    def test_preconditions(self):
        with pytest.raises(PreconditionViolation):
            smooth(LocalHamiltonian(1, ()))
        with pytest.raises(PreconditionViolation):
            smooth(LocalHamiltonian(1, (HamiltonianTerm((0,), -ONE),)))
        with pytest.raises(PreconditionViolation):
            smooth(LocalHamiltonian(2, (HamiltonianTerm((0,), ONE), HamiltonianTerm((1,), ONE))))


class TestEnergyVerifier:
    def test_energy_unitary(self):
        w = energy_unitary(np.diag([0.25, 1.0]))
        np.testing.assert_allclose(w.conj().T @ w, np.eye(4), atol=1e-12)
        # |0>|0> -> sqrt(0.25)|0>|0> + sqrt(0.75)|0>|1>
        np.testing.assert_allclose(np.abs(w[:, 0]) ** 2, [0.25, 0.75, 0, 0], atol=1e-12)

    def test_acceptance_is_one_minus_energy(self, fixtures_dir, stream):
        h = load_hamiltonian(fixtures_dir, "weighted_hamiltonian.json")
        v = kitaev_verifier(h)
        assert v.q == 2 and v.p2 == 3 and v.n == 0
        for i in range(5):
            xi = random_density_matrix(3, stream.child(f"proof={i}").generator)
            assert accept_probability_exact(v, "", xi) == pytest.approx(1 - h.energy(xi), abs=1e-9)

    def test_query_distribution_ignores_the_proof(self, fixtures_dir):
        v = kitaev_verifier(load_hamiltonian(fixtures_dir, "weighted_hamiltonian.json"))
        a = path_distribution(v, "", DensityMatrix.basis("000"))
        b = path_distribution(v, "", DensityMatrix.basis("101"))
        assert a == pytest.approx(b)
        assert a == pytest.approx({(0, 1): 0.45, (1, 2): 0.45, (2, 0): 0.1})

    def test_repeated_supports_get_tags(self, stream):
        h = LocalHamiltonian(2, (HamiltonianTerm((0,), ONE), HamiltonianTerm((0,), ONE / 2),
                                 HamiltonianTerm((1,), ONE)), weights=(0.5, 0.25, 0.25))
        v = kitaev_verifier(h)
        xi = random_density_matrix(2, stream.generator)
        assert accept_probability_exact(v, "", xi) == pytest.approx(1 - h.energy(xi), abs=1e-9)

    def test_needs_weights_and_bounded_terms(self):
        with pytest.raises(PreconditionViolation):
            kitaev_verifier(fixtures.product_hamiltonian(2))
        with pytest.raises(PreconditionViolation):
            kitaev_verifier(LocalHamiltonian(1, (HamiltonianTerm((0,), 2 * ONE),), weights=(1.0,)))


class TestSampling:
    def test_sample_count(self):
        assert sample_count(0.4, 3, 0.1) == 3506
        with pytest.raises(ValueError):
            sample_count(0.0, 3, 0.1)

    def test_failure_bound(self):
        assert sampling_failure_bound(3, 0.4, 3506) == pytest.approx(8 * math.exp(-0.16 * 3506 / 128))
        assert sampling_failure_bound(3, 0.4, 3506) <= 0.1

    def test_sample_terms(self):
        h = fixtures.product_hamiltonian(3)
        h = LocalHamiltonian(3, h.terms, weights=(1 / 3,) * 3)
        g = sample_terms(h, 500, RandomStream(8), smooth_output=False)
        assert len(g.terms) == 500
        assert g.weights == pytest.approx((1 / 500,) * 500)
        assert operator_norm(g.to_matrix() - h.to_matrix()) < 0.1
        again = sample_terms(h, 500, RandomStream(8), smooth_output=False)
        assert [t.support for t in again.terms] == [t.support for t in g.terms]

    def test_output_is_smoothed_by_default(self):
        h = fixtures.random_psd_hamiltonian(3, 4, 20, locality=2)
        h = LocalHamiltonian(4, h.terms, weights=(1 / 20,) * 20)
        raw = sample_terms(h, 60, RandomStream(9), smooth_output=False)
        g = sample_terms(h, 60, RandomStream(9))
        assert len(g.terms) == 60
        np.testing.assert_allclose(g.to_matrix() * 32, raw.to_matrix(), atol=1e-10)
        for t in g.terms:
            assert len(t.support) <= 4
            w = np.linalg.eigvalsh(t.matrix)
            assert w[0] >= -1e-10 and w[-1] <= 1 + 1e-10

    def test_sample_mean_is_the_hamiltonian(self):
        h = fixtures.product_hamiltonian(3)
        h = LocalHamiltonian(3, h.terms, weights=(1 / 3,) * 3)
        xi = DensityMatrix.basis("100")
        stream = RandomStream(21)
        energies = np.array([sample_terms(h, 5, stream.child(f"draw={i}"), smooth_output=False).energy(xi)
                             for i in range(400)])
        sigma = energies.std(ddof=1) / math.sqrt(len(energies))
        assert abs(energies.mean() - h.energy(xi)) <= 3 * sigma

    @pytest.mark.slow
    def test_failure_frequency_within_bound(self):
        h = fixtures.random_psd_hamiltonian(5, 4, 20, locality=2)
        h = LocalHamiltonian(4, h.terms, weights=(1 / 20,) * 20)
        gamma, l, trials = 0.4, 2500, 200
        target = h.to_matrix()
        stream = RandomStream(33)
        failures = sum(
            operator_norm(target - sample_terms(h, l, stream.child(f"trial={i}"), smooth_output=False).to_matrix())
            >= gamma / 4
            for i in range(trials))
        bound = sampling_failure_bound(4, gamma, l)
        assert bound < 1
        assert failures / trials <= bound + 3 * math.sqrt(bound * (1 - bound) / trials)

    def test_sampling_needs_uniform_weights(self, fixtures_dir):
        with pytest.raises(PreconditionViolation):
            sample_terms(load_hamiltonian(fixtures_dir, "weighted_hamiltonian.json"), 10, RandomStream(0))
        with pytest.raises(ValueError):
            sample_terms(LocalHamiltonian(1, (HamiltonianTerm((0,), ONE),), weights=(1.0,)), 0, RandomStream(0))


class TestWeightedErrorCheck:
    @settings(max_examples=15, deadline=None)
    @given(seeds, st.floats(min_value=1e-3, max_value=1.0))
    def test_bound_holds_at_budget(self, seed, eps):
        h = serialization.hamiltonian_from_json(serialization.read_json(
            os.path.join(os.path.dirname(__file__), "..", "..", "fixtures", "weighted_hamiltonian.json")))
        m = len(h.terms)
        eps0, eps1 = eps / (8 * m * m), eps / 6
        h_tilde, p_tilde = perturb_weighted(h, eps0, eps1, RandomStream(seed))
        report = weighted_error_check(h, h_tilde, eps0, eps1, p_tilde=p_tilde)
        assert report.holds
        assert report.violations == []
        assert report.measured <= eps
        assert report.bound == pytest.approx(max(8 * m * m * eps0, 6 * eps1))

    def test_perturbation_sizes(self, fixtures_dir):
        h = load_hamiltonian(fixtures_dir, "weighted_hamiltonian.json")
        h_tilde, p_tilde = perturb_weighted(h, 0.01, 0.05, RandomStream(2))
        np.testing.assert_allclose(np.abs(p_tilde - np.array(h.weights)), 0.01)
        for a, b in zip(h.terms, h_tilde.terms):
            assert operator_norm(a.matrix - b.matrix) == pytest.approx(0.05)

    def test_reports_violated_preconditions(self, fixtures_dir):
        h = load_hamiltonian(fixtures_dir, "weighted_hamiltonian.json")
        h_tilde, p_tilde = perturb_weighted(h, 0.01, 0.05, RandomStream(2))
        report = weighted_error_check(h, h_tilde, 0.001, 0.001, p_tilde=p_tilde)
        assert len(report.violations) == 6
        assert report.as_dict()["violations"] == report.violations

    def test_term_lists_must_match(self, fixtures_dir):
        h = load_hamiltonian(fixtures_dir, "weighted_hamiltonian.json")
        with pytest.raises(PreconditionViolation):
            weighted_error_check(h, fixtures.product_hamiltonian(3), 0.1, 0.1)
