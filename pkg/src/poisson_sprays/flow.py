"""Spray flow with its tangent flow and the fused omega accumulator.

One coupled system is advanced per trajectory::

    Xdot = V(X)
    Jdot = DV(X) J                 J(0) = I
    Mdot = J^T OMEGA_CAN J         M(0) = 0
    Sdot = J^T S(X) J              (optional twisted accumulator)

so ``M(1)`` is the matrix of ``int_0^1 phi_t^* omega_can dt`` at the start point.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .connections import CotangentPath, DensePath
from .conventions import omega_can
from .exceptions import DomainError
from .geometry import Array, ThreeForm, sharp_matrix
from .sprays import SprayField

METHODS = ("rk4-fixed", "rk45-adaptive")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4-fixed"
    steps: int = 200
    rtol: float = 1e-10
    atol: float = 1e-12
    escape_norm: float = 1e6
    dense_output: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.steps < 8:
            raise ValueError("at least 8 steps are required")
        if not (self.rtol > 0 and self.atol > 0 and self.escape_norm > 0):
            raise ValueError("tolerances and escape_norm must be positive")

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "steps": self.steps,
            "rtol": self.rtol,
            "atol": self.atol,
            "escape_norm": self.escape_norm,
        }


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class CotangentState:
    x: Array
    y: Array

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("cotangent state needs base and fiber vectors of equal length")

    @property
    def point(self) -> Array:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_point(cls, X) -> "CotangentState":
        X = np.asarray(X, dtype=float)
        n = X.size // 2
        return cls(X[:n], X[n:])


def as_state(xi) -> CotangentState:
    if isinstance(xi, CotangentState):
        return xi
    if isinstance(xi, tuple) and len(xi) == 2:
        return CotangentState(*xi)
    return CotangentState.from_point(xi)


@dataclass(frozen=True)
class FlowBundle:
    t: Array
    states: Array  # (K+1, 2n)
    velocities: Array  # (K+1, 2n), spray values at the nodes
    jacobians: Array  # (K+1, 2n, 2n)
    field_jacobians: Array  # (K+1, 2n, 2n), DV at the nodes
    accumulator: Array  # (K+1, 2n, 2n)
    twisted: Optional[Array] = None
    status: str = "complete"
    escape_time: Optional[float] = None

    @property
    def dim(self) -> int:
        return self.states.shape[1] // 2

    @property
    def complete(self) -> bool:
        return self.status == "complete"

    @property
    def x(self) -> Array:
        return self.states[:, : self.dim]

    @property
    def y(self) -> Array:
        return self.states[:, self.dim :]

    def omega(self) -> Array:
        if not self.complete:
            raise DomainError(f"flow escaped at t = {self.escape_time}; omega is undefined here")
        return self.accumulator[-1]

    def cotangent_path(self) -> CotangentPath:
        n = self.dim
        return CotangentPath(
            DensePath(self.t, self.x, self.velocities[:, :n]),
            DensePath(self.t, self.y, self.velocities[:, n:]),
        )

    def pushforward(self, v0) -> tuple[Array, Array]:
        """``v_t = J(t) v0`` and its time derivative ``DV J(t) v0`` at the nodes."""
        v = self.jacobians @ np.asarray(v0, dtype=float)
        dv = np.einsum("kab,kb->ka", self.field_jacobians, v)
        return v, dv

    def component_paths(self, v0) -> tuple[DensePath, DensePath]:
        """Dense base part ``vbar_t`` and vertical part ``theta_{v,t}`` of ``v_t``."""
        n = self.dim
        v, dv = self.pushforward(v0)
        return DensePath(self.t, v[:, :n], dv[:, :n]), DensePath(self.t, v[:, n:], dv[:, n:])

    def to_table(self) -> str:
        """Columnar text export: ``t``, state, row-major ``J`` and ``M``."""
        n2 = 2 * self.dim
        cols = ["t"] + [f"X{i}" for i in range(n2)]
        cols += [f"J{i}_{j}" for i in range(n2) for j in range(n2)]
        cols += [f"M{i}_{j}" for i in range(n2) for j in range(n2)]
        buf = io.StringIO()
        buf.write(" ".join(cols) + "\n")
        data = np.column_stack(
            [self.t, self.states, self.jacobians.reshape(len(self.t), -1), self.accumulator.reshape(len(self.t), -1)]
        )
        for row in data:
            buf.write(" ".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()


def _antisym(A: Array) -> Array:
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def twist_matrix(spray: SprayField, sigma: ThreeForm, X: Array) -> Array:
    """``S_{ab} = sigma(pi# y, P e_a, P e_b)`` as a ``(..., 2n, 2n)`` array."""
    n = spray.dim
    x, y = X[..., :n], X[..., n:]
    u = sharp_matrix(spray.pi.matrix(x), y)
    S11 = np.einsum("...ijk,...i->...jk", sigma(x), u)
    S = np.zeros(X.shape[:-1] + (2 * n, 2 * n))
    S[..., :n, :n] = S11
    return S


class _System:
    """Right-hand side of the coupled flow system for a batch of states."""

    def __init__(self, spray: SprayField, sigma: Optional[ThreeForm]):
        self.spray = spray
        self.sigma = sigma
        self.Om = omega_can(spray.dim)

    def __call__(self, X, J):
        V = self.spray(X)
        DV = self.spray.jacobian(X)
        dJ = DV @ J
        JT = np.swapaxes(J, -1, -2)
        dM = _antisym(JT @ self.Om @ J)
        dS = None
        if self.sigma is not None:
            dS = _antisym(JT @ twist_matrix(self.spray, self.sigma, X) @ J)
        return V, DV, dJ, dM, dS


def _inside(spray: SprayField, X: Array, escape_norm: float) -> Array:
    n = spray.dim
    ok = spray.pi.chart.contains(X[..., :n]) & (np.linalg.norm(X, axis=-1) <= escape_norm)
    return ok & np.all(np.isfinite(X), axis=-1)


def integrate_batch(
    spray: SprayField,
    X0,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    sigma: Optional[ThreeForm] = None,
    t_final: float = 1.0,
) -> list[FlowBundle]:
    """Integrate many start states at once; one :class:`FlowBundle` per row of ``X0``.

    Start states outside the chart raise; later escapes are recorded per sample.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    n = spray.dim
    if X0.shape[1] != 2 * n:
        raise ValueError(f"states must have length {2 * n}")
    spray.pi.chart.check(X0[:, :n])
    if cfg.method == "rk45-adaptive":
        return [_integrate_adaptive(spray, X, cfg, sigma, t_final) for X in X0]
    return _integrate_rk4(spray, X0, cfg, sigma, t_final)


def integrate_flow(spray: SprayField, xi0, cfg: IntegratorConfig = DEFAULT_CONFIG, sigma: Optional[ThreeForm] = None, t_final: float = 1.0) -> FlowBundle:
    return integrate_batch(spray, as_state(xi0).point, cfg, sigma, t_final)[0]


def _integrate_rk4(spray, X0, cfg, sigma, t_final) -> list[FlowBundle]:
    B, m = X0.shape
    N = cfg.steps
    h = t_final / N
    t = np.linspace(0.0, t_final, N + 1)
    sysf = _System(spray, sigma)
    nan = np.nan
    Xs = np.full((N + 1, B, m), nan)
    Vs = np.full((N + 1, B, m), nan)
    Js = np.full((N + 1, B, m, m), nan)
    DVs = np.full((N + 1, B, m, m), nan)
    Ms = np.full((N + 1, B, m, m), nan)
    Ss = np.full((N + 1, B, m, m), nan) if sigma is not None else None
    escape = np.full(B, nan)

    X = X0.copy()
    J = np.broadcast_to(np.eye(m), (B, m, m)).copy()
    M = np.zeros((B, m, m))
    S = np.zeros((B, m, m))
    active = np.arange(B)
    Xs[0], Js[0], Ms[0] = X, J, M
    if Ss is not None:
        Ss[0] = S

    def retire(idx_mask, tk):
        nonlocal active
        gone = active[~idx_mask]
        escape[gone] = tk
        active = active[idx_mask]
        return idx_mask

    for k in range(N):
        if active.size == 0:
            break
        a = active
        x, j, mm, ss = X[a], J[a], M[a], S[a]
        k1 = sysf(x, j)
        Vs[k, a], DVs[k, a] = k1[0], k1[1]
        stages = [k1]
        ok = np.ones(a.size, dtype=bool)
        for c in (0.5, 0.5, 1.0):
            prev = stages[-1]
            xs = x + c * h * prev[0]
            js = j + c * h * prev[2]
            ok &= _inside(spray, xs, cfg.escape_norm)
            if not ok.all():
                break
            stages.append(sysf(xs, js))
        if not ok.all():
            keep = retire(ok, t[k])
            if active.size == 0:
                break
            a = active
            x, j, mm, ss = x[keep], j[keep], mm[keep], ss[keep]
            stages = [sysf(x, j)]
            for c in (0.5, 0.5, 1.0):
                prev = stages[-1]
                stages.append(sysf(x + c * h * prev[0], j + c * h * prev[2]))
        w = (1.0, 2.0, 2.0, 1.0)
        comb = lambda i: sum(wi * s[i] for wi, s in zip(w, stages)) * (h / 6.0)
        xn = x + comb(0)
        jn = j + comb(2)
        mn = mm + comb(3)
        sn = ss + comb(4) if sigma is not None else ss
        good = _inside(spray, xn, cfg.escape_norm)
        X[a], J[a], M[a], S[a] = xn, jn, mn, sn
        if not good.all():
            retire(good, t[k + 1])
            a = active
        Xs[k + 1, a], Js[k + 1, a], Ms[k + 1, a] = X[a], J[a], M[a]
        if Ss is not None:
            Ss[k + 1, a] = S[a]
    if active.size:
        V, DV = spray(X[active]), spray.jacobian(X[active])
        Vs[N, active], DVs[N, active] = V, DV

    out = []
    for b in range(B):
        escaped = not np.isnan(escape[b])
        out.append(
            FlowBundle(
                t,
                Xs[:, b],
                Vs[:, b],
                Js[:, b],
                DVs[:, b],
                Ms[:, b],
                None if Ss is None else Ss[:, b],
                "escaped" if escaped else "complete",
                float(escape[b]) if escaped else None,
            )
        )
    return out


def _integrate_adaptive(spray, X0, cfg, sigma, t_final) -> FlowBundle:
    m = X0.size
    sysf = _System(spray, sigma)

    def pack(X, J, M, S=None):
        parts = [X, J.ravel(), M.ravel()]
        if sigma is not None:
            parts.append(S.ravel())
        return np.concatenate(parts)

    def unpack(z):
        X = z[:m]
        J = z[m : m + m * m].reshape(m, m)
        M = z[m + m * m : m + 2 * m * m].reshape(m, m)
        S = z[m + 2 * m * m :].reshape(m, m) if sigma is not None else None
        return X, J, M, S

    def rhs(_, z):
        X, J, _, _ = unpack(z)
        V, _, dJ, dM, dS = sysf(X, J)
        return pack(V, dJ, dM, dS)

    def leave(_, z):
        X = z[:m]
        n = m // 2
        margin = spray.pi.chart.domain_radius - np.linalg.norm(X[:n])
        return min(margin, cfg.escape_norm - np.linalg.norm(X))

    leave.terminal = True
    z0 = pack(X0, np.eye(m), np.zeros((m, m)), np.zeros((m, m)))
    sol = solve_ivp(rhs, (0.0, t_final), z0, method="RK45", rtol=cfg.rtol, atol=cfg.atol, events=leave)
    t = sol.t
    Z = sol.y.T
    K = len(t)
    Xs = Z[:, :m]
    Js = Z[:, m : m + m * m].reshape(K, m, m)
    Ms = _antisym(Z[:, m + m * m : m + 2 * m * m].reshape(K, m, m))
    Ss = _antisym(Z[:, m + 2 * m * m :].reshape(K, m, m)) if sigma is not None else None
    finite = np.isfinite(Xs).all(axis=1)
    Vs = np.full((K, m), np.nan)
    DVs = np.full((K, m, m), np.nan)
    Vs[finite], DVs[finite] = spray(Xs[finite]), spray.jacobian(Xs[finite])
    escaped = sol.status == 1
    return FlowBundle(
        t, Xs, Vs, Js, DVs, Ms, Ss,
        "escaped" if escaped else "complete",
        float(t[-1]) if escaped else None,
    )


def tangent_flow_at_zero_section(spray: SprayField, x, t: float) -> Array:
    """Closed form ``[[I, t Pi(x)^T], [0, I]]`` of ``d phi_t`` at ``(x, 0)``."""
    x = spray.pi.chart.check(x)
    n = spray.dim
    Pi = spray.pi.matrix(x)
    out = np.eye(2 * n)
    out[:n, n:] = t * Pi.T
    return out


def flow_states(field: Callable[[Array], Array], X0: Array, t0: float, t1: float, steps: int) -> Array:
    """State-only RK4 from ``t0`` to ``t1`` (either direction)."""
    X = np.asarray(X0, dtype=float).copy()
    h = (t1 - t0) / steps
    for _ in range(steps):
        k1 = field(X)
        k2 = field(X + h / 2 * k1)
        k3 = field(X + h / 2 * k2)
        k4 = field(X + h * k3)
        X = X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def flow_reversibility_check(spray: SprayField, xi0, cfg: IntegratorConfig = DEFAULT_CONFIG) -> Optional[float]:
    """``|X_back(0) - xi0|`` after integrating to ``t = 1`` and back; ``None`` if the flow escaped."""
    bundle = integrate_flow(spray, xi0, cfg)
    if not bundle.complete:
        return None
    X0 = as_state(xi0).point
    back = flow_states(spray, bundle.states[-1], 1.0, 0.0, cfg.steps)
    return float(np.max(np.abs(back - X0)))
