"""Scikit-learn style front end: cotangent states in, realization forms out."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import catalog
from .connections import CotangentMetric
from .flow import IntegratorConfig
from .geometry import BivectorField
from .realization import omega_batch
from .sprays import SprayField, basic_spray, metric_geodesic_spray


def check_states(X, dim: int) -> np.ndarray:
    """Validate a 2-d array of cotangent states ``(x, y)`` for a chart of dimension ``dim``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2 * dim:
        raise ValueError(f"X has {X.shape[1]} columns; cotangent states of a {dim}-dimensional chart need {2 * dim}")
    return X


def resolve_bivector(bivector) -> tuple[BivectorField, np.ndarray]:
    if isinstance(bivector, str):
        entry = catalog.get(bivector)
        return entry.bivector, entry.metric
    if isinstance(bivector, BivectorField):
        return bivector, np.eye(bivector.dim)
    raise TypeError("bivector must be a catalog name or a BivectorField")


class SymplecticRealization(TransformerMixin, BaseEstimator):
    """Evaluate the spray realization form on rows of cotangent states.

    Parameters
    ----------
    bivector : str or BivectorField
        Catalog name or a bivector object.
    spray : {"basic", "geodesic"}
        Geodesic sprays use the Levi-Civita connection of ``metric``.
    metric : array-like of shape (n, n), optional
        Constant cotangent metric; defaults to the catalog metric or identity.
    n_steps : int
        Fixed RK4 steps on ``[0, 1]``.

    ``transform`` returns the flattened ``(2n, 2n)`` matrices of omega, one
    row per state, and ``poisson_defect`` the base-block defect of their
    inverses. Rows whose flow leaves the chart come back as NaN.
    """

    def __init__(self, bivector="so3-star", spray="basic", metric=None, n_steps=200, method="rk4-fixed"):
        self.bivector = bivector
        self.spray = spray
        self.metric = metric
        self.n_steps = n_steps
        self.method = method

    def fit(self, X=None, y=None):
        pi, default_metric = resolve_bivector(self.bivector)
        if self.spray == "basic":
            spray = basic_spray(pi)
        elif self.spray == "geodesic":
            G = default_metric if self.metric is None else np.asarray(self.metric, dtype=float)
            spray = metric_geodesic_spray(pi, CotangentMetric.constant(G, pi.chart))
        elif isinstance(self.spray, SprayField):
            spray = self.spray
        else:
            raise ValueError(f"spray must be 'basic', 'geodesic' or a SprayField, got {self.spray!r}")
        self.spray_ = spray
        self.config_ = IntegratorConfig(method=self.method, steps=self.n_steps)
        self.n_features_in_ = 2 * pi.dim
        if X is not None:
            check_states(X, pi.dim)
        return self

    def _samples(self, X):
        check_is_fitted(self, "spray_")
        X = check_states(X, self.spray_.dim)
        return omega_batch(self.spray_, X, self.config_)

    def transform(self, X):
        samples = self._samples(X)
        m = self.n_features_in_
        out = []
        for s in samples:
            out.append(s.omega.ravel() if s.omega is not None else np.full(m * m, np.nan))
        return np.asarray(out)

    def poisson_defect(self, X):
        return np.asarray([np.nan if s.poisson_defect is None else s.poisson_defect for s in self._samples(X)])

    def score(self, X, y=None):
        """Negative worst Poisson defect (higher is better)."""
        return -float(np.nanmax(self.poisson_defect(X)))
