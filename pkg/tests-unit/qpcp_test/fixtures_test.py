import numpy as np
import pytest

from qpcp import fixtures, serialization
from qpcp.fixtures import FAMILIES, UnknownFixtureError, generate_fixture
from qpcp.linalg import DensityMatrix
from qpcp.verifier import accept_probability_exact


@pytest.mark.parametrize("family", FAMILIES)
def test_generation_is_deterministic(family):
    assert generate_fixture(family, rng=5) == generate_fixture(family, rng=5)


def test_random_families_depend_on_the_seed():
    assert generate_fixture("random-q1", rng=1) != generate_fixture("random-q1", rng=2)


def test_random_q2_layout():
    v = serialization.verifier_from_json(generate_fixture("random-q2", rng=3)["verifier.json"])
    assert v.q == 2 and v.p2 == 3
    with pytest.raises(ValueError):
        generate_fixture("random-q2", {"q": 1})


def test_params_reach_the_factory():
    v = serialization.verifier_from_json(generate_fixture("reject-always", {"p1": "3", "k": "2"})["verifier.json"])
    assert v.k == 2 and v.p1 == 3


def test_unknown_family():
    with pytest.raises(UnknownFixtureError, match="random-q1"):
        generate_fixture("coin-flip")


def test_product_ksep_files():
    files = generate_fixture("product-ksep", {"n": 4, "k": 2})
    assert set(files) == {"hamiltonian.json", "state.json", "witness.json"}
    state = serialization.density_from_json(files["state.json"])
    assert state.num_qubits == 4
    assert np.real(state.matrix[0, 0]) == pytest.approx(1.0)


def test_ghz_marginals_are_consistent():
    spec = fixtures.ghz_marginals(4)
    assert spec.subsets == ((0, 1), (1, 2), (2, 3))
    np.testing.assert_allclose(spec.targets[0].matrix, np.diag([0.5, 0, 0, 0.5]))


def test_hadamard_output_verifier_accepts_half():
    v = fixtures.hadamard_output_verifier()
    assert accept_probability_exact(v, "", DensityMatrix.basis("00")) == pytest.approx(0.5)


def test_biased_verifier():
    v = fixtures.biased_nonadaptive_verifier(0.9999, 0.9999)
    for bits in ("0", "1"):
        assert accept_probability_exact(v, "", DensityMatrix.basis(bits)) == pytest.approx(0.9999)


def test_random_hamiltonian_is_bounded():
    h = fixtures.random_psd_hamiltonian(4, 3, 6, locality=2)
    assert h.is_psd()
    assert h.norm() <= 1 + 1e-9
