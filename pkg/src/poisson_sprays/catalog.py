"""Built-in bivectors with analytic derivatives and checkable facts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import BivectorField, Chart, ThreeForm, _perms


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    bivector: BivectorField
    poisson: bool
    domain_radius: float
    metric: np.ndarray
    description: str
    closed_form_omega: bool = False
    sigma: Optional[ThreeForm] = None
    witness: Optional[tuple] = None
    facts: tuple = field(default_factory=tuple)

    @property
    def dim(self) -> int:
        return self.bivector.dim


def _levi_civita_symbol() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for (i, j, k), s in _perms(0, 1, 2):
        eps[i, j, k] = s
    return eps


def _so3(R: float) -> BivectorField:
    return BivectorField.linear(_levi_civita_symbol(), R, name="so3-star")


def _sl2(R: float) -> BivectorField:
    # {x1,x2} = -x3, {x2,x3} = x1, {x3,x1} = x2
    c = np.zeros((3, 3, 3))
    c[0, 1, 2], c[1, 0, 2] = -1.0, 1.0
    c[1, 2, 0], c[2, 1, 0] = 1.0, -1.0
    c[2, 0, 1], c[0, 2, 1] = 1.0, -1.0
    return BivectorField.linear(c, R, name="sl2-star")


def _heisenberg(R: float) -> BivectorField:
    # {x1,x2} = x3
    c = np.zeros((3, 3, 3))
    c[0, 1, 2], c[1, 0, 2] = 1.0, -1.0
    return BivectorField.linear(c, R, name="heisenberg")


def _quadratic(R: float) -> BivectorField:
    def comp(x):
        x = np.asarray(x, dtype=float)
        f = 1.0 + x[..., 0] ** 2
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 1], out[..., 1, 0] = f, -f
        return out

    def dcomp(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (2, 2, 2))
        out[..., 0, 1, 0], out[..., 1, 0, 0] = 2 * x[..., 0], -2 * x[..., 0]
        return out

    def ddcomp(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (2, 2, 2, 2))
        out[..., 0, 1, 0, 0], out[..., 1, 0, 0, 0] = 2.0, -2.0
        return out

    return BivectorField(Chart(2, R), comp, dcomp, ddcomp, "analytic", "quadratic")


def _non_poisson(R: float) -> BivectorField:
    # pi^{12} = x1, pi^{23} = x2, pi^{31} = x3
    c = np.zeros((3, 3, 3))
    for (i, j), k in [((0, 1), 0), ((1, 2), 1), ((2, 0), 2)]:
        c[i, j, k], c[j, i, k] = 1.0, -1.0
    return BivectorField.linear(c, R, name="non-poisson-witness")


def symplectic_block(n_pairs: int = 1, scale: float = 1.0) -> np.ndarray:
    n = 2 * n_pairs
    Pi = np.zeros((n, n))
    for k in range(n_pairs):
        Pi[2 * k, 2 * k + 1] = scale
        Pi[2 * k + 1, 2 * k] = -scale
    return Pi


TWISTED_SIGMA = {(0, 1, 2): 1.0, (1, 2, 3): 0.5}
NON_POISSON_WITNESS = (np.array([1.0, 1.0, 1.0]), np.array([0.3, -0.2, 0.25]))


def _twisted_sigma() -> ThreeForm:
    s = np.zeros((4, 4, 4))
    for (i, j, k), v in TWISTED_SIGMA.items():
        for idx, sgn in _perms(i, j, k):
            s[idx] = sgn * v
    return ThreeForm.constant(s, 10.0)


def catalog() -> list[CatalogEntry]:
    entries = [
        CatalogEntry("zero", BivectorField.zero(3, 10.0), True, 10.0, np.eye(3),
                     "pi = 0 on R^3", closed_form_omega=True,
                     facts=("jacobiator vanishes", "omega = omega_can")),
        CatalogEntry("constant-symplectic",
                     BivectorField.constant(symplectic_block(1), 10.0, name="constant-symplectic"),
                     True, 10.0, np.eye(2), "pi = d1 ^ d2 on R^2", closed_form_omega=True,
                     facts=("jacobiator vanishes", "omega = [[0, I], [-I, Pi]]")),
        CatalogEntry("so3-star", _so3(2.0), True, 2.0, np.eye(3),
                     "Lie-Poisson structure of so(3)*", facts=("jacobiator vanishes",)),
        CatalogEntry("sl2-star", _sl2(2.0), True, 2.0, np.eye(3),
                     "Lie-Poisson structure of sl(2)*", facts=("jacobiator vanishes",)),
        CatalogEntry("heisenberg", _heisenberg(2.0), True, 2.0, np.eye(3),
                     "Lie-Poisson structure of the Heisenberg algebra dual", facts=("jacobiator vanishes",)),
        CatalogEntry("quadratic", _quadratic(2.0), True, 2.0, np.eye(2),
                     "pi^{12} = 1 + x1^2 on R^2", facts=("jacobiator vanishes",)),
        CatalogEntry("non-poisson-witness", _non_poisson(3.0), False, 3.0, np.eye(3),
                     "pi^{12} = x1, pi^{23} = x2, pi^{31} = x3", witness=NON_POISSON_WITNESS,
                     facts=("J^{123}(1,1,1) = 3",)),
        CatalogEntry("twisted-demo",
                     BivectorField.constant(symplectic_block(2, 0.5), 10.0, name="twisted-demo"),
                     True, 10.0, np.eye(4), "constant pi on R^4 with constant sigma",
                     closed_form_omega=True, sigma=_twisted_sigma(),
                     facts=("jacobiator vanishes",)),
    ]
    return entries


def get(name: str) -> CatalogEntry:
    for e in catalog():
        if e.name == name:
            return e
    raise KeyError(f"unknown catalog entry {name!r}; known: {', '.join(names())}")


def names() -> list[str]:
    return [e.name for e in catalog()]


def poisson_entries() -> list[CatalogEntry]:
    return [e for e in catalog() if e.poisson]
