"""Chart-level bivector calculus.

All evaluators are batched over leading axes: a point array of shape
``(..., n)`` produces ``(..., n, n)`` components, ``(..., n, n, n)`` first
derivatives and so on. See :mod:`poisson_sprays.conventions` for indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from . import dual
from .exceptions import CapabilityError, DomainError, ShapeError

Array = np.ndarray
Evaluator = Callable[[Array], Array]

MODES = ("analytic-callback", "central-difference", "dual-number")


@dataclass(frozen=True)
class Chart:
    """Open ball of radius ``domain_radius`` about the origin of R^dim."""

    dim: int
    domain_radius: float = np.inf

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"chart dimension must be a positive integer, got {self.dim}")
        if not self.domain_radius > 0:
            raise ValueError(f"domain_radius must be positive, got {self.domain_radius}")

    def contains(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x, axis=-1) < self.domain_radius

    def check(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ShapeError(f"expected points with trailing dimension {self.dim}, got shape {x.shape}")
        if not np.all(self.contains(x)):
            raise DomainError(f"point outside the chart ball of radius {self.domain_radius}")
        return x


@dataclass(frozen=True)
class DerivativeStrategy:
    mode: str = "analytic-callback"
    h: float = 1e-5
    h2: float = 1e-3
    tol: float = 1e-12

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown derivative mode {self.mode!r}")
        if self.mode == "central-difference" and not (self.h > 0 and self.h2 > 0):
            raise ValueError("central-difference steps must be positive")

    @classmethod
    def central(cls, h: float = 1e-5, h2: float = 1e-3) -> "DerivativeStrategy":
        return cls("central-difference", h=h, h2=h2, tol=10 * h * h)


def central_difference(f: Evaluator, x: Array, h: float) -> Array:
    """Jacobian of ``f`` by central differences; derivative index appended last."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def _pointwise_dual(f: Evaluator) -> Evaluator:
    """Jacobian of a pointwise callable by dual numbers, looped over the batch."""

    def jac(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        out = [dual.jacobian(f, p)[1] for p in flat]
        return np.asarray(out).reshape(x.shape[:-1] + out[0].shape)

    return jac


def _antisym(a: Array) -> Array:
    return 0.5 * (a - np.swapaxes(a, -1, -2))


@dataclass(frozen=True)
class BivectorField:
    """A bivector on a chart together with derivative evaluators.

    ``components`` returns the raw matrix; :meth:`matrix` antisymmetrizes.
    """

    chart: Chart
    components: Evaluator
    d_components: Optional[Evaluator] = None
    dd_components: Optional[Evaluator] = None
    provenance: str = "analytic"
    name: str = ""

    @property
    def dim(self) -> int:
        return self.chart.dim

    def matrix(self, x) -> Array:
        return _antisym(np.asarray(self.components(x), dtype=float))

    def derivative(self, x) -> Array:
        if self.d_components is None:
            raise CapabilityError(f"bivector {self.name!r} has no first-derivative evaluator")
        d = np.asarray(self.d_components(x), dtype=float)
        return 0.5 * (d - np.swapaxes(d, -2, -3))

    def second_derivative(self, x) -> Array:
        if self.dd_components is None:
            raise CapabilityError(f"bivector {self.name!r} has no second-derivative evaluator")
        d = np.asarray(self.dd_components(x), dtype=float)
        return 0.5 * (d - np.swapaxes(d, -3, -4))

    def scaled(self, c: float) -> "BivectorField":
        dd = self.dd_components
        return replace(
            self,
            components=lambda x: c * np.asarray(self.components(x)),
            d_components=None if self.d_components is None else (lambda x: c * np.asarray(self.d_components(x))),
            dd_components=None if dd is None else (lambda x: c * np.asarray(dd(x))),
            name=f"{c}*{self.name}",
        )

    # constructors ------------------------------------------------------------

    @classmethod
    def zero(cls, n: int, domain_radius: float = np.inf) -> "BivectorField":
        return cls.constant(np.zeros((n, n)), domain_radius, name="zero")

    @classmethod
    def constant(cls, Pi, domain_radius: float = np.inf, name: str = "constant") -> "BivectorField":
        Pi = np.asarray(Pi, dtype=float)
        n = Pi.shape[0]
        if Pi.shape != (n, n):
            raise ShapeError("constant bivector must be a square matrix")

        def comp(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(Pi, x.shape[:-1] + (n, n)).copy()

        def dcomp(x):
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1] + (n, n, n))

        def ddcomp(x):
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1] + (n, n, n, n))

        return cls(Chart(n, domain_radius), comp, dcomp, ddcomp, "analytic", name)

    @classmethod
    def linear(cls, structure_constants, domain_radius: float = np.inf, name: str = "linear") -> "BivectorField":
        """Lie-Poisson bivector ``pi^{ij}(x) = sum_k c[i, j, k] x_k``."""
        c = np.asarray(structure_constants, dtype=float)
        n = c.shape[0]
        if c.shape != (n, n, n):
            raise ShapeError("structure constants must have shape (n, n, n)")
        c = 0.5 * (c - np.swapaxes(c, 0, 1))

        def comp(x):
            return np.einsum("ijk,...k->...ij", c, np.asarray(x, dtype=float))

        def dcomp(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(c, x.shape[:-1] + c.shape).copy()

        def ddcomp(x):
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1] + (n, n, n, n))

        return cls(Chart(n, domain_radius), comp, dcomp, ddcomp, "analytic", name)

    @classmethod
    def from_callable(
        cls,
        components: Evaluator,
        chart: Chart,
        strategy: DerivativeStrategy = DerivativeStrategy.central(),
        d_components: Optional[Evaluator] = None,
        dd_components: Optional[Evaluator] = None,
        name: str = "user",
    ) -> "BivectorField":
        """Wrap a user evaluator, deriving missing derivatives per ``strategy``.

        In ``dual-number`` mode ``components`` is called pointwise with a
        :class:`~poisson_sprays.dual.Dual` point and may return nested lists.
        """
        if strategy.mode == "analytic-callback":
            if d_components is None:
                raise CapabilityError("analytic-callback mode needs d_components")
            return cls(chart, components, d_components, dd_components, "analytic", name)
        if strategy.mode == "dual-number":
            raw = components

            def pointwise(x):
                out = raw(x)
                return out if isinstance(out, dual.Dual) else dual.lift(out, chart.dim)

            def comp(x):
                x = np.asarray(x, dtype=float)
                flat = x.reshape(-1, chart.dim)
                out = np.asarray([dual.value(pointwise(dual.Dual.seed(p))) for p in flat])
                return out.reshape(x.shape[:-1] + (chart.dim, chart.dim))

            d = d_components or _pointwise_dual(pointwise)
            dd = dd_components or (lambda x: central_difference(d, x, strategy.h2))
            return cls(chart, comp, d, dd, "dual-number", name)
        d = d_components or (lambda x: central_difference(components, x, strategy.h))
        dd = dd_components or (lambda x: central_difference(d, x, strategy.h2))
        return cls(chart, components, d, dd, "finite-difference", name)

    @classmethod
    def polynomial(cls, terms: Sequence[dict], dim: int, domain_radius: float = np.inf, name: str = "polynomial") -> "BivectorField":
        """Bivector from monomial terms ``{i, j, exponents, coefficient}``.

        Indices ``i, j`` are 1-based. A term on ``(i, j)`` also defines
        ``(j, i)`` with the opposite sign; repeated terms accumulate.
        """
        poly = PolynomialTensor.from_terms(terms, dim)
        return cls(Chart(dim, domain_radius), poly.value, poly.derivative, poly.second_derivative, "analytic", name)


@dataclass(frozen=True)
class PolynomialTensor:
    """Sum of monomials ``coeff[t] * x**E[t]`` placed into an ``(n, n)`` slot tensor."""

    exponents: Array  # (T, n) integers
    slots: Array  # (T, n, n)

    @classmethod
    def from_terms(cls, terms: Sequence[dict], dim: int) -> "PolynomialTensor":
        E, S = [], []
        for k, term in enumerate(terms):
            try:
                i, j = int(term["i"]) - 1, int(term["j"]) - 1
                exps = [int(e) for e in term["exponents"]]
                coeff = float(term["coefficient"])
            except (KeyError, TypeError, ValueError) as err:
                raise ValueError(f"terms[{k}]: malformed monomial term ({err})") from None
            if not (0 <= i < dim and 0 <= j < dim):
                raise ValueError(f"terms[{k}]: index out of range for dimension {dim}")
            if i == j:
                raise ValueError(f"terms[{k}]: diagonal entry ({i + 1},{j + 1}) of an antisymmetric bivector")
            if len(exps) != dim or min(exps, default=0) < 0:
                raise ValueError(f"terms[{k}]: exponents must be {dim} non-negative integers")
            slot = np.zeros((dim, dim))
            slot[i, j] = coeff
            slot[j, i] = -coeff
            E.append(exps)
            S.append(slot)
        if not E:
            return cls(np.zeros((0, dim), dtype=int), np.zeros((0, dim, dim)))
        return cls(np.asarray(E, dtype=int), np.asarray(S))

    @staticmethod
    def _monomials(x: Array, E: Array, coef: Array) -> Array:
        # coef * prod_k x_k^E[t, k]; negative exponents only occur with zero coef
        Ec = np.maximum(E, 0)
        return coef * np.prod(np.power(x[..., None, :], Ec), axis=-1)

    def value(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        mon = self._monomials(x, self.exponents, np.ones(len(self.exponents)))
        return np.einsum("...t,tij->...ij", mon, self.slots)

    def derivative(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        out = []
        for k in range(n):
            E = self.exponents.copy()
            coef = E[:, k].astype(float)
            E[:, k] -= 1
            out.append(np.einsum("...t,tij->...ij", self._monomials(x, E, coef), self.slots))
        return np.stack(out, axis=-1)

    def second_derivative(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        out = np.zeros(x.shape[:-1] + self.slots.shape[1:] + (n, n))
        for k in range(n):
            for l in range(n):
                E = self.exponents.copy()
                coef = E[:, k].astype(float)
                E[:, k] -= 1
                coef = coef * np.maximum(E[:, l], 0)
                E[:, l] -= 1
                out[..., k, l] = np.einsum("...t,tij->...ij", self._monomials(x, E, coef), self.slots)
        return out


@dataclass(frozen=True)
class ThreeForm:
    """A 3-form ``sigma_{ijk}(x)`` on a chart; ``closed`` is ``assumed`` or ``fd-checked``."""

    chart: Chart
    components: object
    closed: str = "assumed"

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.components(x), dtype=float)

    @classmethod
    def constant(cls, sigma, domain_radius: float = np.inf) -> "ThreeForm":
        s = antisymmetrize3(np.asarray(sigma, dtype=float))
        n = s.shape[0]

        def comp(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(s, x.shape[:-1] + s.shape).copy()

        return cls(Chart(n, domain_radius), comp, "assumed")

    @classmethod
    def zero(cls, n: int) -> "ThreeForm":
        return cls.constant(np.zeros((n, n, n)))

    @classmethod
    def from_entries(cls, dim: int, entries, domain_radius: float = np.inf) -> "ThreeForm":
        """Constant form from ``{i, j, k, value}`` entries with 1-based indices."""
        s = np.zeros((dim, dim, dim))
        for e in entries:
            i, j, k = int(e["i"]) - 1, int(e["j"]) - 1, int(e["k"]) - 1
            v = float(e["value"])
            for (a, b, c), sgn in _perms(i, j, k):
                s[a, b, c] += sgn * v
        return cls(Chart(dim, domain_radius), lambda x, s=s: np.broadcast_to(s, np.shape(x)[:-1] + s.shape).copy())


def _perms(i, j, k):
    return [((i, j, k), 1), ((j, k, i), 1), ((k, i, j), 1), ((j, i, k), -1), ((i, k, j), -1), ((k, j, i), -1)]


def antisymmetrize3(s: np.ndarray) -> np.ndarray:
    """Antisymmetric part over the last three axes."""
    lead = list(range(s.ndim - 3))
    base = s.ndim - 3
    out = np.zeros_like(s)
    for axes, sgn in _perms(0, 1, 2):
        out = out + sgn * np.transpose(s, lead + [base + a for a in axes])
    return out / 6.0


# fields -------------------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    """A covector or vector field with its Jacobian ``[..., i, k] = d_k f_i``."""

    value: Evaluator
    jacobian: Evaluator
    constant: bool = False
    kind: str = "covector"

    def __call__(self, x) -> Array:
        return np.asarray(self.value(x), dtype=float)

    @classmethod
    def const(cls, c, kind: str = "covector") -> "Field":
        c = np.asarray(c, dtype=float)
        n = c.shape[-1]

        def val(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(c, x.shape[:-1] + (n,)).copy()

        def jac(x):
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1] + (n, n))

        return cls(val, jac, True, kind)

    @classmethod
    def from_callable(cls, f: Evaluator, jacobian: Optional[Evaluator] = None, h: float = 1e-5, kind: str = "covector") -> "Field":
        return cls(f, jacobian or (lambda x: central_difference(f, x, h)), False, kind)


def covector_field(c) -> Field:
    return Field.const(c, "covector")


def vector_field(c) -> Field:
    return Field.const(c, "vector")


# operations ---------------------------------------------------------------------


def eval_bivector(pi: BivectorField, x) -> Array:
    """``Pi(x)``, exactly antisymmetric; raises :class:`DomainError` outside the chart."""
    return pi.matrix(pi.chart.check(x))


def _dims(pi: BivectorField, *arrays):
    for a in arrays:
        if np.shape(a)[-1:] != (pi.dim,):
            raise ShapeError(f"expected trailing dimension {pi.dim}, got shape {np.shape(a)}")


def sharp_matrix(Pi: Array, alpha: Array) -> Array:
    return np.einsum("...pq,...p->...q", Pi, alpha)


def sharp(pi: BivectorField, x, alpha) -> Array:
    """``(pi# alpha)^q = sum_p pi^{pq}(x) alpha_p``."""
    alpha = np.asarray(alpha, dtype=float)
    _dims(pi, alpha)
    return sharp_matrix(eval_bivector(pi, x), alpha)


@lru_cache(maxsize=None)
def _sorted_triples(n: int):
    """Flat index of the sorted triple and the permutation sign, per ``(i, j, k)``."""
    src = np.zeros((n, n, n), dtype=np.intp)
    sign = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if len({i, j, k}) < 3:
                    continue
                a, b, c = sorted((i, j, k))
                src[i, j, k] = (a * n + b) * n + c
                inversions = (i > j) + (i > k) + (j > k)
                sign[i, j, k] = -1.0 if inversions % 2 else 1.0
    return src, sign


def jacobiator_from(Pi: Array, dPi: Array) -> Array:
    t = np.einsum("...il,...jkl->...ijk", Pi, dPi)
    raw = t + np.einsum("...ijk->...jki", t) + np.einsum("...ijk->...kij", t)
    # copy each sorted-triple value with its sign so antisymmetry holds bit-for-bit
    n = Pi.shape[-1]
    src, sign = _sorted_triples(n)
    flat = raw.reshape(raw.shape[:-3] + (n**3,))
    return sign * np.take(flat, src, axis=-1)


def jacobiator(pi: BivectorField, x) -> Array:
    """``J^{ijk}(x)``, fully antisymmetric; zero exactly when ``pi`` is Poisson."""
    x = pi.chart.check(x)
    return jacobiator_from(pi.matrix(x), pi.derivative(x))


def pairing(theta, v) -> Array:
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    if theta.shape[-1] != v.shape[-1]:
        raise ShapeError(f"cannot pair covector of length {theta.shape[-1]} with vector of length {v.shape[-1]}")
    return np.einsum("...i,...i->...", theta, v)


def lie_derivative_function(pi: BivectorField, alpha: Field, grad_f: Array, x) -> Array:
    """``L_alpha(f) = (pi# alpha)(f)`` from the gradient of ``f`` at ``x``."""
    return pairing(grad_f, sharp(pi, x, alpha(x)))


def _bracket_parts(pi: BivectorField, alpha: Field, beta: Field, x):
    Pi = pi.matrix(x)
    dPi = pi.derivative(x)
    a, b = alpha(x), beta(x)
    Ja, Jb = alpha.jacobian(x), beta.jacobian(x)
    X = sharp_matrix(Pi, a)
    Y = sharp_matrix(Pi, b)
    dX = np.einsum("...pki,...p->...ki", dPi, a) + np.einsum("...pk,...pi->...ki", Pi, Ja)
    dY = np.einsum("...pki,...p->...ki", dPi, b) + np.einsum("...pk,...pi->...ki", Pi, Jb)
    return Pi, dPi, a, b, Ja, Jb, X, Y, dX, dY


def cotangent_bracket(pi: BivectorField, alpha: Field, beta: Field, x) -> Array:
    """``[alpha, beta]_pi = L_{pi# alpha} beta - L_{pi# beta} alpha - d pi(alpha, beta)``."""
    x = pi.chart.check(x)
    Pi, dPi, a, b, Ja, Jb, X, Y, dX, dY = _bracket_parts(pi, alpha, beta, x)
    lie_X_b = np.einsum("...k,...ik->...i", X, Jb) + np.einsum("...k,...ki->...i", b, dX)
    lie_Y_a = np.einsum("...k,...ik->...i", Y, Ja) + np.einsum("...k,...ki->...i", a, dY)
    d_pi_ab = (
        np.einsum("...pqi,...p,...q->...i", dPi, a, b)
        + np.einsum("...pq,...pi,...q->...i", Pi, Ja, b)
        + np.einsum("...pq,...p,...qi->...i", Pi, a, Jb)
    )
    return lie_X_b - lie_Y_a - d_pi_ab


def bracket_field(pi: BivectorField, alpha: Field, beta: Field, h: float = 1e-5) -> Field:
    """``[alpha, beta]_pi`` as a field, so brackets can be nested.

    For constant forms the bracket is ``sum_k d_k pi^{pq} a_p b_q dx_k`` and its
    Jacobian uses the analytic second derivatives when available.
    """

    def val(x):
        return cotangent_bracket(pi, alpha, beta, x)

    if alpha.constant and beta.constant and pi.dd_components is not None:

        def jac(x):
            x = np.asarray(x, dtype=float)
            return np.einsum("...pqkl,...p,...q->...kl", pi.second_derivative(x), alpha(x), beta(x))

        return Field(val, jac, False, "covector")
    return Field.from_callable(val, h=h)
