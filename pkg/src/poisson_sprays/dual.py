"""Forward-mode dual numbers over numpy arrays.

A :class:`Dual` carries a value array ``val`` and a tangent array ``eps``
whose shape is ``val.shape + (k,)``: the trailing axis indexes ``k``
simultaneous seed directions. Arithmetic, indexing, a handful of ufuncs,
:func:`einsum` and :func:`inv` propagate tangents by the product rule.
"""

from __future__ import annotations

import numpy as np


class Dual:
    __array_priority__ = 1000

    def __init__(self, val, eps):
        self.val = np.asarray(val, dtype=float)
        self.eps = np.asarray(eps, dtype=float)
        if self.eps.shape[:-1] != self.val.shape:
            raise ValueError(
                f"tangent shape {self.eps.shape} does not extend value shape {self.val.shape}"
            )

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndir(self) -> int:
        return self.eps.shape[-1]

    @classmethod
    def seed(cls, x) -> "Dual":
        """Independent variables: ``x`` of shape (n,) seeded with the identity."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("seed expects a 1-d point")
        return cls(x, np.eye(x.size))

    def __repr__(self) -> str:
        return f"Dual(val={self.val!r}, eps=<{self.eps.shape}>)"

    def __len__(self) -> int:
        return len(self.val)

    def __getitem__(self, idx) -> "Dual":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            return Dual(self.val[idx], self.eps[idx + (slice(None),)])
        return Dual(self.val[idx], self.eps[idx + (Ellipsis,)])

    # binary arithmetic ------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Dual):
            return other
        other = np.asarray(other, dtype=float)
        return Dual(other, np.zeros(other.shape + (self.ndir,)))

    def __add__(self, other):
        o = self._coerce(other)
        val = self.val + o.val
        return Dual(val, np.broadcast_to(self.eps, val.shape + (self.ndir,)) + o.eps)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return Dual(
            self.val * o.val,
            self.eps * o.val[..., None] + self.val[..., None] * o.eps,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        q = self.val / o.val
        return Dual(q, (self.eps - q[..., None] * o.eps) / o.val[..., None])

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("dual exponents are not supported")
        p = float(p)
        if p == 0.0:
            return Dual(np.ones_like(self.val), np.zeros_like(self.eps))
        return Dual(self.val**p, (p * self.val ** (p - 1))[..., None] * self.eps)

    # numpy interop -----------------------------------------------------------

    _UNARY = {
        np.sin: np.cos,
        np.cos: lambda v: -np.sin(v),
        np.exp: np.exp,
        np.log: lambda v: 1.0 / v,
        np.sqrt: lambda v: 0.5 / np.sqrt(v),
        np.tanh: lambda v: 1.0 - np.tanh(v) ** 2,
        np.arctan: lambda v: 1.0 / (1.0 + v * v),
    }

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            return NotImplemented
        if ufunc in self._UNARY and len(inputs) == 1:
            d = self._UNARY[ufunc](self.val)
            return Dual(ufunc(self.val), d[..., None] * self.eps)
        if ufunc is np.negative:
            return -self
        binary = {
            np.add: lambda a, b: a + b,
            np.subtract: lambda a, b: a - b,
            np.multiply: lambda a, b: a * b,
            np.true_divide: lambda a, b: a / b,
        }
        if ufunc in binary and len(inputs) == 2:
            a, b = inputs
            a = a if isinstance(a, Dual) else self._coerce(a)
            return binary[ufunc](a, b)
        if ufunc is np.square:
            return self * self
        return NotImplemented


def lift(obj, ndir: int) -> Dual:
    """Assemble a nested list / object array of Duals and floats into one Dual."""
    arr = np.empty(np.shape(np.asarray(obj, dtype=object)), dtype=object)
    arr[...] = np.asarray(obj, dtype=object)
    val = np.zeros(arr.shape)
    eps = np.zeros(arr.shape + (ndir,))
    for idx in np.ndindex(arr.shape):
        item = arr[idx]
        if isinstance(item, Dual):
            val[idx] = item.val
            eps[idx] = item.eps
        else:
            val[idx] = float(item)
    return Dual(val, eps)


def value(obj) -> np.ndarray:
    return obj.val if isinstance(obj, Dual) else np.asarray(obj, dtype=float)


def tangent(obj, ndir: int) -> np.ndarray:
    if isinstance(obj, Dual):
        return obj.eps
    arr = np.asarray(obj, dtype=float)
    return np.zeros(arr.shape + (ndir,))


def einsum(subscripts: str, *operands):
    """``np.einsum`` with product-rule tangent propagation.

    Subscripts must be explicit (``->`` present); a leading ``...`` is allowed.
    """
    if "->" not in subscripts:
        raise ValueError("dual einsum needs explicit output subscripts")
    lhs, out = subscripts.split("->")
    terms = lhs.split(",")
    vals = [value(op) for op in operands]
    duals = [i for i, op in enumerate(operands) if isinstance(op, Dual)]
    res = np.einsum(subscripts, *vals)
    if not duals:
        return res
    ndir = operands[duals[0]].ndir
    free = sorted(set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ") - set(subscripts))
    z = free[0]
    eps = np.zeros(np.shape(res) + (ndir,))
    for i in duals:
        sub = list(terms)
        sub[i] = sub[i] + z
        args = list(vals)
        args[i] = operands[i].eps
        eps = eps + np.einsum(",".join(sub) + "->" + out + z, *args)
    return Dual(res, eps)


def inv(a):
    """Matrix inverse over the last two axes; ``d(A^-1) = -A^-1 dA A^-1``."""
    if not isinstance(a, Dual):
        return np.linalg.inv(a)
    ai = np.linalg.inv(a.val)
    eps = -np.einsum("...ij,...jkz,...kl->...ilz", ai, a.eps, ai)
    return Dual(ai, eps)


def jacobian(f, x) -> tuple[np.ndarray, np.ndarray]:
    """Value and Jacobian of ``f`` at the 1-d point ``x``.

    ``f`` may return a Dual, a float array, or nested lists mixing both.
    The Jacobian has shape ``f(x).shape + (x.size,)``.
    """
    x = np.asarray(x, dtype=float)
    out = f(Dual.seed(x))
    if not isinstance(out, Dual):
        out = lift(out, x.size)
    return out.val, out.eps
