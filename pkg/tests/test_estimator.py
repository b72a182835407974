import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from oracles import constant_omega
from poisson_sprays import catalog
from poisson_sprays.estimator import SymplecticRealization, check_states


def states(n, count, seed=0, scale=0.1):
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.uniform(-0.5, 0.5, (count, n)), scale * rng.standard_normal((count, n))], axis=1)


def test_params_roundtrip_and_clone():
    est = SymplecticRealization(bivector="heisenberg", spray="geodesic", n_steps=100)
    params = est.get_params()
    assert params["bivector"] == "heisenberg" and params["n_steps"] == 100
    other = clone(est)
    assert other.get_params() == params
    est.set_params(n_steps=50)
    assert est.n_steps == 50


def test_transform_shape_and_defect():
    X = states(3, 6)
    est = SymplecticRealization().fit(X)
    out = est.transform(X)
    assert out.shape == (6, 36)
    assert np.all(est.poisson_defect(X) <= 1e-6)
    assert est.score(X) >= -1e-6


def test_constant_entry_matches_closed_form():
    est = SymplecticRealization(bivector="constant-symplectic").fit()
    X = states(2, 3, scale=1.0)
    Pi = catalog.symplectic_block(1)
    for row in est.transform(X):
        np.testing.assert_allclose(row.reshape(4, 4), constant_omega(Pi), atol=1e-13)


def test_geodesic_spray_in_pipeline():
    X = states(3, 4, seed=1)
    pipe = make_pipeline(SymplecticRealization(bivector="so3-star", spray="geodesic"))
    out = pipe.fit_transform(X)
    assert out.shape == (4, 36) and np.all(np.isfinite(out))


def test_escaped_rows_are_nan():
    est = SymplecticRealization(bivector="quadratic").fit()
    X = np.array([[0.0, 0.0, 0.0, -3.0], [0.1, 0.1, 0.1, 0.1]])
    out = est.transform(X)
    assert np.all(np.isnan(out[0])) and np.all(np.isfinite(out[1]))
    assert np.isnan(est.poisson_defect(X)[0])


def test_shape_validation():
    with pytest.raises(ValueError, match="columns"):
        check_states(np.zeros((2, 5)), 3)
    est = SymplecticRealization().fit()
    with pytest.raises(ValueError):
        est.transform(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        SymplecticRealization(spray="magnetic").fit()


def test_unfitted_raises():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        SymplecticRealization().transform(states(3, 1))
