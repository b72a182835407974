"""Poisson sprays as vector fields on the chart cotangent space.

A spray maps a state ``X = (x, y)`` of shape ``(..., 2n)`` to ``(xdot, ydot)``.
The built-in kinds have ``xdot = Pi(x).T @ y``; the geodesic kind adds the
vertical part ``ydot_r = -sum_{p,q} G[p, q, r](x) y_p y_q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import dual
from .connections import ContravariantConnection, CotangentMetric, levi_civita_contravariant
from .geometry import Array, BivectorField, central_difference, sharp_matrix


class SprayValidationError(ValueError):
    """A spray fails the spray axioms beyond tolerance."""


@dataclass(frozen=True)
class SprayField:
    pi: BivectorField
    kind: str
    field: Callable[[Array], Array]
    jacobian: Callable[[Array], Array]
    connection: Optional[ContravariantConnection] = None

    @property
    def dim(self) -> int:
        return self.pi.dim

    def __call__(self, X) -> Array:
        return np.asarray(self.field(np.asarray(X, dtype=float)), dtype=float)

    def split(self, X) -> tuple[Array, Array]:
        v = self(X)
        n = self.dim
        return v[..., :n], v[..., n:]


def _split(X, n):
    X = np.asarray(X, dtype=float)
    return X[..., :n], X[..., n:]


def _base_velocity(pi: BivectorField, X):
    x, y = _split(X, pi.dim)
    return sharp_matrix(pi.matrix(x), y)


def _base_jacobian(pi: BivectorField, X):
    x, y = _split(X, pi.dim)
    dx = np.einsum("...pqk,...p->...qk", pi.derivative(x), y)
    dy = np.swapaxes(pi.matrix(x), -1, -2)
    return dx, dy


def basic_spray(pi: BivectorField) -> SprayField:
    """``xdot = pi#(y)``, ``ydot = 0``."""
    n = pi.dim

    def field(X):
        return np.concatenate([_base_velocity(pi, X), np.zeros(np.shape(X)[:-1] + (n,))], axis=-1)

    def jac(X):
        dx, dy = _base_jacobian(pi, X)
        zero = np.zeros(dx.shape)
        return np.concatenate(
            [np.concatenate([dx, dy], axis=-1), np.concatenate([zero, zero], axis=-1)], axis=-2
        )

    return SprayField(pi, "basic", field, jac)


def geodesic_spray(pi: BivectorField, conn: ContravariantConnection) -> SprayField:
    """Geodesic vector field of a contravariant connection."""
    n = pi.dim

    def field(X):
        x, y = _split(X, n)
        ydot = -np.einsum("...pqr,...p,...q->...r", conn(x), y, y)
        return np.concatenate([_base_velocity(pi, X), ydot], axis=-1)

    def jac(X):
        x, y = _split(X, n)
        dx, dy = _base_jacobian(pi, X)
        G = conn(x)
        vx = -np.einsum("...pqrk,...p,...q->...rk", conn.derivative(x), y, y)
        vy = -np.einsum("...sqr,...q->...rs", G, y) - np.einsum("...qsr,...q->...rs", G, y)
        return np.concatenate(
            [np.concatenate([dx, dy], axis=-1), np.concatenate([vx, vy], axis=-1)], axis=-2
        )

    return SprayField(pi, "geodesic", field, jac, conn)


def metric_geodesic_spray(pi: BivectorField, g: CotangentMetric) -> SprayField:
    return geodesic_spray(pi, levi_civita_contravariant(g, pi))


def custom_spray(pi: BivectorField, field: Callable[[Array], Array], jacobian: Optional[Callable] = None, mode: str = "dual-number") -> SprayField:
    """Wrap an arbitrary ``X -> Xdot`` field; a missing Jacobian is derived per ``mode``.

    In ``dual-number`` mode ``field`` must accept a 1-d Dual state.
    """
    if jacobian is None:
        if mode == "dual-number":

            def jacobian(X):
                X = np.asarray(X, dtype=float)
                flat = X.reshape(-1, X.shape[-1])
                out = np.asarray([dual.jacobian(field, p)[1] for p in flat])
                return out.reshape(X.shape + (X.shape[-1],))

        elif mode == "central-difference":

            def jacobian(X):
                return central_difference(field, X, 1e-6)

        else:
            raise ValueError(f"unknown jacobian mode {mode!r}")
    return SprayField(pi, "custom", field, jacobian)


def perturbed(spray: SprayField, base_offset=None, vertical_offset=None) -> SprayField:
    """Fault injection: add constant offsets to the base and/or vertical components."""
    n = spray.dim
    off = np.zeros(2 * n)
    if base_offset is not None:
        off[:n] = base_offset
    if vertical_offset is not None:
        off[n:] = vertical_offset
    return SprayField(spray.pi, "custom", lambda X: spray(X) + off, spray.jacobian, spray.connection)


# axiom checks --------------------------------------------------------------------


def check_spray_axiom1(spray: SprayField, X) -> float:
    """``max |xdot - pi#(y)|`` over the sample states ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    xdot, _ = spray.split(X)
    return float(np.max(np.abs(xdot - _base_velocity(spray.pi, X)), initial=0.0))


def check_spray_homogeneity(spray: SprayField, X, scales: Sequence[float] = (0.5, 2.0, 10.0)) -> float:
    """Max defect of ``xdot(x, ty) = t xdot(x, y)`` and ``ydot(x, ty) = t^2 ydot(x, y)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = spray.dim
    xdot, ydot = spray.split(X)
    worst = 0.0
    for t in scales:
        if not t > 0:
            raise ValueError("homogeneity scales must be positive")
        Xt = X.copy()
        Xt[:, n:] *= t
        xt, yt = spray.split(Xt)
        worst = max(worst, float(np.max(np.abs(xt - t * xdot))), float(np.max(np.abs(yt - t * t * ydot))))
    return worst


def validation_states(spray: SprayField, count: int = 64, seed: int = 0) -> Array:
    """Deterministic sample states inside the chart for axiom checks."""
    rng = np.random.default_rng(seed)
    n = spray.dim
    R = min(spray.pi.chart.domain_radius, 2.0)
    x = rng.standard_normal((count, n))
    x *= (0.5 * R * rng.uniform(0, 1, (count, 1)) ** (1 / n)) / np.linalg.norm(x, axis=1, keepdims=True)
    y = rng.standard_normal((count, n))
    return np.concatenate([x, y], axis=1)


def validate_spray(spray: SprayField, tol: float = 1e-10) -> None:
    """Raise :class:`SprayValidationError` if either axiom fails beyond ``tol``."""
    X = validation_states(spray)
    a1 = check_spray_axiom1(spray, X)
    hom = check_spray_homogeneity(spray, X) / (1.0 + np.max(np.abs(spray(X))) * 100.0)
    if a1 > tol or hom > tol:
        raise SprayValidationError(
            f"{spray.kind} spray fails the spray axioms (base defect {a1:.3e}, homogeneity defect {hom:.3e})"
        )
