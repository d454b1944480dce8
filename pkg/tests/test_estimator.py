import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ttnembed.estimator import TTNEmbedder
from ttnembed.exceptions import ShapeError
from ttnembed.network import caterpillar_topology, from_statevector, infidelity
from ttnembed.states import bas_state
from ttnembed.utils.validation import check_fraction, check_positive_int, check_state_batch, check_state_vector

from conftest import ghz, random_state


def test_params_and_clone():
    est = TTNEmbedder(method="D_all", n_layers=2, chi=4)
    params = est.get_params()
    assert params["method"] == "D_all" and params["n_layers"] == 2 and params["chi"] == 4
    twin = clone(est).set_params(n_layers=5)
    assert twin.n_layers == 5 and est.n_layers == 2


def test_fit_transform_roundtrip():
    psi = ghz(6)
    est = TTNEmbedder(n_layers=1, chi=2, sweeps=10).fit(psi)
    assert est.n_qubits_ == 6
    assert est.infidelity_ < 1e-10
    assert est.score(psi) > 1 - 1e-10
    zero = est.transform(psi)
    assert abs(abs(zero[0]) - 1) < 1e-10
    assert np.allclose(est.inverse_transform(zero), psi, atol=1e-10)
    batch = np.stack([psi, psi])
    assert est.transform(batch).shape == (2, 64)


def test_fit_lattice_and_explicit_topology():
    psi = bas_state(2, 3)
    est = TTNEmbedder(n_layers=2, chi=4, lattice=(2, 3), sweeps=20, learning_rate=1.0).fit(psi)
    assert abs(infidelity(est.prepare_state(), est.ttn_) - est.infidelity_) < 1e-12
    top = caterpillar_topology(6)
    est2 = TTNEmbedder(method="D_all", topology=top, n_layers=1).fit(psi)
    assert est2.ttn_.topology == top


def test_fit_accepts_network(rng):
    psi = random_state(5, rng)
    ttn = from_statevector(psi, caterpillar_topology(5), chi_max=2)
    est = TTNEmbedder(n_layers=1, sweeps=5).fit(ttn)
    assert est.infidelity_ < 1e-8


def test_not_fitted():
    with pytest.raises(NotFittedError):
        TTNEmbedder().transform(ghz(3))


@pytest.mark.parametrize(
    "params",
    [{"method": "Adam"}, {"n_layers": 0}, {"chi": 1.5}, {"learning_rate": 2.0}, {"topology": "ring"}, {"chi_cap": 0}],
)
def test_bad_params_rejected(params):
    with pytest.raises((ValueError, TypeError)):
        TTNEmbedder(**params).fit(ghz(3))


def test_state_validation():
    with pytest.raises(ShapeError):
        check_state_vector(np.ones(6) / np.sqrt(6))
    with pytest.raises(ValueError):
        check_state_vector(np.ones(4))
    assert np.allclose(check_state_vector(np.ones(4), normalize=True), 0.5)
    with pytest.raises(ValueError):
        check_state_vector(np.array([np.nan, 0, 0, 1]))
    with pytest.raises(ShapeError):
        check_state_batch(np.ones((2, 2, 2)))
    with pytest.raises(ShapeError):
        check_state_vector(ghz(3), n_qubits=4)


def test_scalar_checks():
    assert check_positive_int("k", 3) == 3
    with pytest.raises(TypeError):
        check_positive_int("k", True)
    assert check_fraction("r", 1) == 1.0
    with pytest.raises(ValueError):
        check_fraction("r", 0.0, allow_zero=False)
