"""Classical and contravariant connections, and transport along cotangent paths.

Transport formulas assume the flat chart connection; for ``u`` a covector
path and ``v`` a vector path over a cotangent path ``(a, gamma)``::

    (nabla_a u)_i = du_i/dt + sum_{p,j} d_i pi^{pj}(gamma) a_p u_j
    (nabla_a v)^j = dv^j/dt - sum_{i,p} d_i pi^{pj}(gamma) a_p v^i
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dual
from .exceptions import DomainError, ShapeError
from .geometry import (
    Array,
    BivectorField,
    Chart,
    Field,
    central_difference,
    cotangent_bracket,
    sharp_matrix,
)


@dataclass(frozen=True)
class ClassicalConnection:
    """Christoffel data ``C[..., r, p, q] = Gamma^r_{pq}``."""

    chart: Chart
    christoffel: Callable[[Array], Array]
    torsion_free: bool = True

    def __post_init__(self):
        if self.torsion_free:
            rng = np.random.default_rng(0)
            R = min(self.chart.domain_radius, 1.0)
            pts = rng.uniform(-R, R, size=(8, self.chart.dim)) / np.sqrt(self.chart.dim)
            C = np.asarray(self.christoffel(pts))
            if not np.allclose(C, np.swapaxes(C, -1, -2), atol=1e-12):
                raise ValueError("torsion_free connection must have symmetric Christoffel symbols")

    def __call__(self, x) -> Array:
        return np.asarray(self.christoffel(x), dtype=float)

    @classmethod
    def flat(cls, chart: Chart) -> "ClassicalConnection":
        n = chart.dim
        return cls(chart, lambda x: np.zeros(np.shape(x)[:-1] + (n, n, n)))

    def on_forms(self, X: Array, alpha: Field, x) -> Array:
        """``(nabla_X alpha)_q = X^p (d_p alpha_q - Gamma^r_{pq} alpha_r)``."""
        return np.einsum("...p,...qp->...q", X, alpha.jacobian(x)) - np.einsum(
            "...p,...rpq,...r->...q", X, self(x), alpha(x)
        )

    def on_vectors(self, X: Array, V: Field, x) -> Array:
        """``(nabla_X V)^r = X^p (d_p V^r + Gamma^r_{pq} V^q)``."""
        return np.einsum("...p,...rp->...r", X, V.jacobian(x)) + np.einsum(
            "...p,...rpq,...q->...r", X, self(x), V(x)
        )


@dataclass(frozen=True)
class ContravariantConnection:
    """``nabla_{dx_p} dx_q = sum_r G[..., p, q, r] dx_r``; ``d_coeffs`` appends ``d_k``."""

    chart: Chart
    pi: BivectorField
    coeffs: Callable[[Array], Array]
    d_coeffs: Optional[Callable[[Array], Array]] = None
    name: str = ""

    def __call__(self, x) -> Array:
        return np.asarray(self.coeffs(x), dtype=float)

    def derivative(self, x) -> Array:
        if self.d_coeffs is not None:
            return np.asarray(self.d_coeffs(x), dtype=float)
        return central_difference(self.coeffs, x, 1e-5)

    def apply(self, alpha: Field, beta: Field, x) -> Array:
        """``nabla_alpha beta`` at ``x``."""
        a, b = alpha(x), beta(x)
        X = sharp_matrix(self.pi.matrix(x), a)
        return np.einsum("...p,...q,...pqr->...r", a, b, self(x)) + np.einsum(
            "...k,...rk->...r", X, beta.jacobian(x)
        )

    @classmethod
    def from_constant(cls, pi: BivectorField, G) -> "ContravariantConnection":
        G = np.asarray(G, dtype=float)
        n = pi.dim
        return cls(
            pi.chart,
            pi,
            lambda x: np.broadcast_to(G, np.shape(x)[:-1] + G.shape).copy(),
            lambda x: np.zeros(np.shape(x)[:-1] + G.shape + (n,)),
            "constant",
        )


@dataclass(frozen=True)
class CotangentMetric:
    """Metric ``g^{ij}(x)`` on covectors, with first and optional second derivatives."""

    chart: Chart
    g: Callable[[Array], Array]
    dg: Callable[[Array], Array]
    ddg: Optional[Callable[[Array], Array]] = None
    eps_g: float = 1e-12

    def __call__(self, x) -> Array:
        return np.asarray(self.g(x), dtype=float)

    def second(self, x) -> Array:
        if self.ddg is not None:
            return np.asarray(self.ddg(x), dtype=float)
        return central_difference(self.dg, x, 1e-3)

    def check(self, x) -> None:
        G = self(x)
        if not np.allclose(G, np.swapaxes(G, -1, -2), atol=1e-12):
            raise ValueError("cotangent metric must be symmetric")
        if np.min(np.linalg.eigvalsh(G)) < self.eps_g:
            raise np.linalg.LinAlgError("cotangent metric is not positive definite")

    @classmethod
    def constant(cls, G, chart: Chart) -> "CotangentMetric":
        G = np.asarray(G, dtype=float)
        n = chart.dim
        shape = G.shape
        return cls(
            chart,
            lambda x: np.broadcast_to(G, np.shape(x)[:-1] + shape).copy(),
            lambda x: np.zeros(np.shape(x)[:-1] + shape + (n,)),
            lambda x: np.zeros(np.shape(x)[:-1] + shape + (n, n)),
        )

    @classmethod
    def identity(cls, chart: Chart) -> "CotangentMetric":
        return cls.constant(np.eye(chart.dim), chart)


# induced contravariant connections ---------------------------------------------


def _sharp_field_parts(pi: BivectorField, alpha: Field, x):
    Pi, dPi = pi.matrix(x), pi.derivative(x)
    a, Ja = alpha(x), alpha.jacobian(x)
    X = sharp_matrix(Pi, a)
    dX = np.einsum("...pqk,...p->...qk", dPi, a) + np.einsum("...pq,...pk->...qk", Pi, Ja)
    return X, dX


def sharp_field(pi: BivectorField, alpha: Field) -> Field:
    """The vector field ``pi# alpha`` with its Jacobian."""
    return Field(
        lambda x: _sharp_field_parts(pi, alpha, x)[0],
        lambda x: _sharp_field_parts(pi, alpha, x)[1],
        False,
        "vector",
    )


def lie_bracket_vectors(X: Field, V: Field, x) -> Array:
    """``[X, V]^j = X^k d_k V^j - V^k d_k X^j``."""
    return np.einsum("...k,...jk->...j", X(x), V.jacobian(x)) - np.einsum(
        "...k,...jk->...j", V(x), X.jacobian(x)
    )


def induced_contra_on_forms(nabla: ClassicalConnection, pi: BivectorField, alpha: Field, beta: Field, x) -> Array:
    """``nabla-bar_alpha beta = nabla_{pi# beta} alpha + [alpha, beta]_pi``."""
    x = pi.chart.check(x)
    Y = sharp_matrix(pi.matrix(x), beta(x))
    return nabla.on_forms(Y, alpha, x) + cotangent_bracket(pi, alpha, beta, x)


def induced_contra_on_vectors(nabla: ClassicalConnection, pi: BivectorField, alpha: Field, V: Field, x) -> Array:
    """``nabla-bar_alpha V = pi# nabla_V alpha + [pi# alpha, V]``."""
    x = pi.chart.check(x)
    nabla_V_alpha = nabla.on_forms(V(x), alpha, x)
    return sharp_matrix(pi.matrix(x), nabla_V_alpha) + lie_bracket_vectors(sharp_field(pi, alpha), V, x)


def compatibility_defect(nabla: ClassicalConnection, pi: BivectorField, alpha: Field, beta: Field, x) -> Array:
    """``nabla-bar_alpha(pi# beta) - pi#(nabla-bar_alpha beta)``.

    Vanishes for Poisson ``pi``; otherwise equals ``J(alpha, beta, .)``.
    """
    x = pi.chart.check(x)
    lhs = induced_contra_on_vectors(nabla, pi, alpha, sharp_field(pi, beta), x)
    rhs = sharp_matrix(pi.matrix(x), induced_contra_on_forms(nabla, pi, alpha, beta, x))
    return lhs - rhs


def induced_connection(nabla: ClassicalConnection, pi: BivectorField) -> ContravariantConnection:
    """The contravariant connection on forms induced by ``nabla``, as coefficients.

    ``G[p, q, r] = -sum_k pi^{qk} Gamma^p_{kr} + d_r pi^{pq}``.
    """

    def coeffs(x):
        return -np.einsum("...qk,...pkr->...pqr", pi.matrix(x), nabla(x)) + pi.derivative(x)

    return ContravariantConnection(pi.chart, pi, coeffs, None, "induced")


def contravariant_torsion(conn: ContravariantConnection, alpha: Field, beta: Field, x) -> Array:
    """``T(alpha, beta) = nabla_alpha beta - nabla_beta alpha - [alpha, beta]_pi``."""
    x = conn.chart.check(x)
    return conn.apply(alpha, beta, x) - conn.apply(beta, alpha, x) - cotangent_bracket(conn.pi, alpha, beta, x)


# Levi-Civita -------------------------------------------------------------------


def koszul_coefficients(Pi, dPi, G, dG):
    """Levi-Civita coefficients from pointwise data; Dual inputs propagate derivatives.

    ``K[p, q, s] = 2 g(nabla_{dx_p} dx_q, dx_s)`` from the six-term Koszul
    template on coordinate forms, then ``G[p, q, r] = K[p, q, s] g^{-1}[s, r] / 2``.
    """
    E = dual.einsum
    # pi#(dx_p)(g^{qs}) = pi^{pj} d_j g^{qs}
    lie = E("...pj,...qsj->...pqs", Pi, dG)
    # g([dx_p, dx_q]_pi, dx_s) = d_k pi^{pq} g^{ks}
    brk = E("...pqk,...ks->...pqs", dPi, G)
    K = (
        lie
        + E("...pqs->...qps", lie)
        - E("...spq->...pqs", lie)
        + brk
        - E("...psq->...pqs", brk)
        - E("...qsp->...pqs", brk)
    )
    return 0.5 * E("...pqs,...sr->...pqr", K, dual.inv(G))


def levi_civita_contravariant(g: CotangentMetric, pi: BivectorField) -> ContravariantConnection:
    """The metric, torsion-free contravariant connection of ``g``."""
    n = pi.dim

    def coeffs(x):
        x = np.asarray(x, dtype=float)
        return koszul_coefficients(pi.matrix(x), pi.derivative(x), g(x), g.dg(x))

    def d_coeffs(x):
        x = np.asarray(x, dtype=float)
        try:
            ddPi = pi.second_derivative(x)
        except Exception:
            ddPi = central_difference(pi.derivative, x, 1e-3)
        out = koszul_coefficients(
            dual.Dual(pi.matrix(x), pi.derivative(x)),
            dual.Dual(pi.derivative(x), ddPi),
            dual.Dual(g(x), g.dg(x)),
            dual.Dual(g.dg(x), g.second(x)),
        )
        return out.eps if isinstance(out, dual.Dual) else np.zeros(np.shape(out) + (n,))

    return ContravariantConnection(pi.chart, pi, coeffs, d_coeffs, "levi-civita")


def metric_defect(conn: ContravariantConnection, g: CotangentMetric, x) -> Array:
    """``L_{pi# dx_p} g^{qs} - g(nabla_p dx_q, dx_s) - g(dx_q, nabla_p dx_s)`` on coordinate forms."""
    x = np.asarray(x, dtype=float)
    Pi, G, dG, C = conn.pi.matrix(x), g(x), g.dg(x), conn(x)
    lie = np.einsum("...pj,...qsj->...pqs", Pi, dG)
    return lie - np.einsum("...pqr,...rs->...pqs", C, G) - np.einsum("...psr,...qr->...pqs", C, G)


def torsion_tensor(conn: ContravariantConnection, x) -> Array:
    """``T(dx_p, dx_q)_r`` for all coordinate pairs; tensoriality makes this complete."""
    x = np.asarray(x, dtype=float)
    C = conn(x)
    return C - np.swapaxes(C, -2, -3) - conn.pi.derivative(x)


# cotangent paths and transport ------------------------------------------------


@dataclass(frozen=True)
class DensePath:
    """Values on a grid with node derivatives; cubic Hermite in between."""

    t: Array
    values: Array
    derivs: Array

    def __post_init__(self):
        if self.values.shape != self.derivs.shape or self.values.shape[0] != self.t.shape[0]:
            raise ShapeError("path values, derivatives and grid disagree")

    def __call__(self, s: float) -> Array:
        t = self.t
        if s <= t[0]:
            return self.values[0].copy() if s == t[0] else self._hermite(0, s)
        k = int(np.searchsorted(t, s, side="right") - 1)
        k = min(max(k, 0), len(t) - 2)
        if s == t[k]:
            return self.values[k].copy()
        return self._hermite(k, s)

    def _hermite(self, k: int, s: float) -> Array:
        t0, t1 = self.t[k], self.t[k + 1]
        h = t1 - t0
        u = (s - t0) / h
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return (
            h00 * self.values[k]
            + h10 * h * self.derivs[k]
            + h01 * self.values[k + 1]
            + h11 * h * self.derivs[k + 1]
        )


@dataclass(frozen=True)
class CotangentPath:
    """A covector path ``a(t)`` over a base path ``gamma(t)``."""

    gamma: DensePath
    a: DensePath

    @property
    def t(self) -> Array:
        return self.gamma.t

    def compatibility_defect(self, pi: BivectorField) -> float:
        """``max_k |pi#(a(t_k)) - dgamma/dt(t_k)|``."""
        v = sharp_matrix(pi.matrix(self.gamma.values), self.a.values)
        return float(np.max(np.abs(v - self.gamma.derivs)))


def _correction(dPi: Array, a: Array, u: Array) -> Array:
    # sum_{p,j} d_i pi^{pj} a_p u_j
    return np.einsum("...pji,...p,...j->...i", dPi, a, u)


def transport_derivative_forms(pi: BivectorField, path: CotangentPath, u: Array, du: Array) -> Array:
    """``nabla-bar_a u`` on the path grid (flat classical connection)."""
    u, du = np.asarray(u, dtype=float), np.asarray(du, dtype=float)
    if u.shape != path.a.values.shape or du.shape != u.shape:
        raise ShapeError("covector path does not match the cotangent path grid")
    return du + _correction(pi.derivative(path.gamma.values), path.a.values, u)


def transport_derivative_vectors(pi: BivectorField, path: CotangentPath, v: Array, dv: Array) -> Array:
    """``nabla-bar_a v`` on the path grid (flat classical connection)."""
    v, dv = np.asarray(v, dtype=float), np.asarray(dv, dtype=float)
    if v.shape != path.a.values.shape or dv.shape != v.shape:
        raise ShapeError("vector path does not match the cotangent path grid")
    return dv - np.einsum("...pji,...p,...i->...j", pi.derivative(path.gamma.values), path.a.values, v)


def solve_transport(
    pi: BivectorField,
    path: CotangentPath,
    rhs: DensePath,
    condition: str = "initial",
    value=None,
) -> Array:
    """Solve ``nabla-bar_a theta = rhs`` by RK4 on the path grid.

    ``condition`` is ``"initial"`` (``theta(0) = value``) or ``"final"``
    (``theta(1) = value``). Returns ``theta`` at the grid nodes.
    """
    t = path.t
    n = path.a.values.shape[-1]
    theta0 = np.zeros(n) if value is None else np.asarray(value, dtype=float)
    if not np.all(pi.chart.contains(path.gamma.values)):
        raise DomainError("cotangent path leaves the chart")

    def f(s, th):
        g = path.gamma(s)
        return rhs(s) - _correction(pi.derivative(g), path.a(s), th)

    out = np.empty((len(t), n))
    if condition == "initial":
        order = range(len(t) - 1)
        out[0] = theta0
        for k in order:
            out[k + 1] = _rk4_step(f, t[k], out[k], t[k + 1] - t[k])
    elif condition == "final":
        out[-1] = theta0
        for k in range(len(t) - 1, 0, -1):
            out[k - 1] = _rk4_step(f, t[k], out[k], t[k - 1] - t[k])
    else:
        raise ValueError(f"condition must be 'initial' or 'final', got {condition!r}")
    return out


def _rk4_step(f, s, y, h):
    k1 = f(s, y)
    k2 = f(s + h / 2, y + h / 2 * k1)
    k3 = f(s + h / 2, y + h / 2 * k2)
    k4 = f(s + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def transport_residual(pi: BivectorField, path: CotangentPath, theta: Array, rhs: Array) -> float:
    """``max |nabla-bar_a theta - rhs|`` with fourth-order grid differences of ``theta``."""
    return float(np.max(np.abs(transport_derivative_forms(pi, path, theta, grid_derivative(path.t, theta)) - rhs)))


def grid_derivative(t: Array, y: Array) -> Array:
    """Fourth-order finite-difference derivative on a uniform grid (one-sided at the ends)."""
    h = t[1] - t[0]
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=1e-15):
        raise ValueError("grid_derivative needs a uniform grid")
    if len(t) < 5:
        raise ValueError("grid_derivative needs at least 5 nodes")
    d = np.empty_like(y)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h)
    d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * h)
    d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * h)
    d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * h)
    return d
