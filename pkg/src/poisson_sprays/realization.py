"""Realization form and the checks built on it at cotangent points."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import null_space

from .connections import DensePath, solve_transport
from .conventions import CHI_NORMALIZATION, omega_can
from .exceptions import DegenerateSampleError, DomainError
from .flow import (
    DEFAULT_CONFIG,
    CotangentState,
    FlowBundle,
    IntegratorConfig,
    as_state,
    integrate_batch,
)
from .geometry import Array, BivectorField, ThreeForm, jacobiator_from, sharp_matrix
from .sprays import SprayField, validate_spray

DET_FLOOR = 1e-12


@dataclass(frozen=True)
class RealizationSample:
    xi: CotangentState
    omega: Optional[Array]
    omega_inv: Optional[Array]
    det: Optional[float]
    poisson_defect: Optional[float]
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "complete"


def _prepare(spray: SprayField, allow_invalid_spray: bool) -> None:
    if spray.kind == "custom" and not allow_invalid_spray:
        validate_spray(spray)


def _states(xis) -> Array:
    if isinstance(xis, np.ndarray) and xis.ndim == 2:
        return xis.astype(float)
    return np.asarray([as_state(xi).point for xi in xis])


def sample_from_bundle(spray: SprayField, X0: Array, bundle: FlowBundle) -> RealizationSample:
    xi = CotangentState.from_point(X0)
    if not bundle.complete:
        return RealizationSample(xi, None, None, None, None, "escaped")
    n = spray.dim
    om = bundle.omega()
    det = float(np.linalg.det(om))
    if abs(det) <= DET_FLOOR:
        return RealizationSample(xi, om, None, det, None, "degenerate")
    inv = np.linalg.inv(om)
    defect = float(np.max(np.abs(inv[:n, :n] - spray.pi.matrix(xi.x))))
    return RealizationSample(xi, om, inv, det, defect, "complete")


def omega_batch(spray: SprayField, xis, cfg: IntegratorConfig = DEFAULT_CONFIG, allow_invalid_spray: bool = False) -> list[RealizationSample]:
    _prepare(spray, allow_invalid_spray)
    X0 = _states(xis)
    bundles = integrate_batch(spray, X0, cfg)
    return [sample_from_bundle(spray, X, b) for X, b in zip(X0, bundles)]


def omega_at(spray: SprayField, xi, cfg: IntegratorConfig = DEFAULT_CONFIG, allow_invalid_spray: bool = False) -> RealizationSample:
    """``omega`` at ``xi`` with its inverse and the Poisson-map defect.

    The defect is ``max |P omega^{-1} P^T - Pi(x)|`` with ``P = [I 0]``.
    Custom sprays failing the spray axioms are refused unless
    ``allow_invalid_spray`` is set.
    """
    return omega_batch(spray, [xi], cfg, allow_invalid_spray)[0]


def zero_section_formula(pi: BivectorField, x) -> Array:
    """``[[0, I], [-I, Pi(x)]]``."""
    x = pi.chart.check(x)
    n = pi.dim
    out = omega_can(n)
    out[n:, n:] = pi.matrix(x)
    return out


def _directions(n: int, K: int, seed: int) -> Array:
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((K, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def nondegeneracy_radius(
    spray: SprayField,
    x,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    K: Optional[int] = None,
    delta: float = 1e-6,
    eps_max: float = 1.0,
    seed: int = 0,
) -> float:
    """Largest tested ``eps <= eps_max`` with ``|det omega(x, eps u)| >= delta`` for all
    ``K`` unit directions ``u``, found by bisection to ``1e-3 * eps_max``.
    """
    x = spray.pi.chart.check(np.asarray(x, dtype=float))
    n = spray.dim
    K = 4 * n * n if K is None else K
    U = _directions(n, K, seed)

    def passes(eps: float) -> bool:
        X0 = np.concatenate([np.broadcast_to(x, (K, n)), eps * U], axis=1)
        for b in integrate_batch(spray, X0, cfg):
            if not b.complete or abs(np.linalg.det(b.omega())) < delta:
                return False
        return True

    if passes(eps_max):
        return float(eps_max)
    lo, hi = 0.0, eps_max
    res = 1e-3 * eps_max
    while hi - lo > res:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


def orthogonality_defect(spray: SprayField, xi, cfg: IntegratorConfig = DEFAULT_CONFIG, bundle: Optional[FlowBundle] = None) -> float:
    """``max |omega(v, w)|`` for ``v`` in ``ker dp`` and ``w`` in ``ker d(p o phi_1)``."""
    xi = as_state(xi)
    if bundle is None:
        bundle = integrate_batch(spray, xi.point[None], cfg)[0]
    om = bundle.omega()
    n = spray.dim
    PJ = bundle.jacobians[-1][:n, :]
    W = null_space(PJ)
    if W.shape[1] != n:
        raise DegenerateSampleError(f"d(p o phi_1) has kernel of dimension {W.shape[1]}, expected {n}")
    V = np.zeros((2 * n, n))
    V[n:, :] = np.eye(n)
    return float(np.max(np.abs(V.T @ om @ W)))


@dataclass(frozen=True)
class BoundaryResult:
    lhs: float
    rhs: float
    defect: float
    chi_integral: float
    theta_v: Array
    theta_w: Array


def _simpson(t: Array, f: Array) -> float:
    return float(simpson(f, x=t))


def boundary_formula(
    spray: SprayField,
    xi,
    v0,
    w0,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    conditions: tuple = (("initial", None), ("initial", None)),
    bundle: Optional[FlowBundle] = None,
) -> BoundaryResult:
    """Compare ``omega(v0, w0)`` with the transport boundary expression

    ``(<th_w, vbar> - <th_v, wbar> - pi(th_v, th_w)) |_0^1`` where
    ``nabla-bar_a th_v = theta_v`` along ``a(t) = phi_t(xi)``.
    Also returns ``int_0^1 J(a, th_v, th_w) dt`` by Simpson quadrature.
    """
    xi = as_state(xi)
    pi = spray.pi
    if bundle is None:
        bundle = integrate_batch(spray, xi.point[None], cfg)[0]
    om = bundle.omega()
    v0, w0 = np.asarray(v0, dtype=float), np.asarray(w0, dtype=float)
    path = bundle.cotangent_path()
    vbar, theta_v = bundle.component_paths(v0)
    wbar, theta_w = bundle.component_paths(w0)
    (cv, valv), (cw, valw) = conditions
    tv = solve_transport(pi, path, theta_v, cv, valv)
    tw = solve_transport(pi, path, theta_w, cw, valw)
    Pi = pi.matrix(bundle.x)
    expr = (
        np.einsum("ki,ki->k", tw, vbar.values)
        - np.einsum("ki,ki->k", tv, wbar.values)
        - np.einsum("kpq,kp,kq->k", Pi, tv, tw)
    )
    lhs = float(v0 @ om @ w0)
    rhs = float(expr[-1] - expr[0])
    Jac = jacobiator_from(Pi, pi.derivative(bundle.x))
    integrand = np.einsum("kijl,ki,kj,kl->k", Jac, bundle.y, tv, tw)
    return BoundaryResult(lhs, rhs, abs(lhs - rhs), _simpson(bundle.t, integrand), tv, tw)


def boundary_formula_defect_general(spray: SprayField, xi, v0, w0, cfg: IntegratorConfig = DEFAULT_CONFIG) -> tuple[float, float, float]:
    """``(lhs - rhs, chi_integral, difference)`` for a possibly non-Poisson bivector.

    ``lhs - rhs`` should equal ``CHI_NORMALIZATION * chi_integral``.
    """
    r = boundary_formula(spray, xi, v0, w0, cfg)
    signed = r.lhs - r.rhs
    return signed, r.chi_integral, abs(signed - CHI_NORMALIZATION * r.chi_integral)


def poisson_map_covector_check(spray: SprayField, xi, theta, cfg: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """Solve ``i_{v0} omega = p* theta`` and return ``|dp(v0) - pi#(theta)|``."""
    xi = as_state(xi)
    s = omega_at(spray, xi, cfg)
    if s.omega is None or s.omega_inv is None:
        raise DegenerateSampleError(f"omega unavailable at this point (status {s.status})")
    n = spray.dim
    theta = np.asarray(theta, dtype=float)
    rhs = np.concatenate([theta, np.zeros(n)])
    try:
        v0 = np.linalg.solve(s.omega.T, rhs)
    except np.linalg.LinAlgError as err:
        raise DegenerateSampleError(str(err)) from None
    target = sharp_matrix(spray.pi.matrix(xi.x), theta)
    return float(np.max(np.abs(v0[:n] - target)))


def closedness_check(spray: SprayField, xi, cfg: IntegratorConfig = DEFAULT_CONFIG, h_fd: float = 1e-3) -> float:
    """Max over coordinate triples of the central-difference ``d omega``."""
    X0 = as_state(xi).point
    m = X0.size
    disp = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = h_fd
        disp += [X0 + e, X0 - e]
    bundles = integrate_batch(spray, np.asarray(disp), cfg)
    if not all(b.complete for b in bundles):
        raise DomainError("a displaced flow escaped the chart")
    oms = [b.omega() for b in bundles]
    # grad[i][a, b] = d_i omega_ab
    grad = [(oms[2 * i] - oms[2 * i + 1]) / (2 * h_fd) for i in range(m)]
    worst = 0.0
    for i, j, k in combinations(range(m), 3):
        d = grad[i][j, k] - grad[j][i, k] + grad[k][i, j]
        worst = max(worst, abs(d))
    return float(worst)


def twisted_omega_at(spray: SprayField, sigma: ThreeForm, xi, cfg: IntegratorConfig = DEFAULT_CONFIG) -> Array:
    """``int_0^1 phi_t^*(i_V p^* sigma) dt`` at ``xi`` by the fused accumulator."""
    b = integrate_batch(spray, as_state(xi).point[None], cfg, sigma=sigma)[0]
    if not b.complete:
        raise DomainError(f"flow escaped at t = {b.escape_time}")
    return b.twisted[-1]
