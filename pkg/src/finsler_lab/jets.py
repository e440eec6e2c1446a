"""Second-order truncated Taylor arithmetic in four variables.

A :class:`Jet` carries the value, gradient and Hessian of a scalar quantity
with respect to the chart variables ``(x1, x2, xi1, xi2)``.  Arithmetic on
jets propagates all three exactly (to roundoff), so any function written with
ordinary operators and the elementwise functions of this module can be
differentiated twice by evaluating it on seeded jets.

Jets may carry leading batch dimensions (``v.shape == B``, ``g.shape == B +
(4,)``, ``H.shape == B + (4, 4)``); this is how quadrature nodes are
evaluated in one pass.  Complex dtypes are supported, which lets callers take
one extra derivative by the complex-step trick.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

NVAR = 4
COORD_NAMES = ("x1", "x2", "xi1", "xi2")

ScalarField4 = Callable[[Sequence], object]


def _b(a, extra):
    # append `extra` trailing singleton axes for broadcasting against g / H
    a = np.asarray(a)
    return a.reshape(a.shape + (1,) * extra)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet:
    """Value, gradient and Hessian of a quantity in the four chart variables."""

    __slots__ = ("v", "g", "H")
    __array_ufunc__ = None

    def __init__(self, v, g, H):
        self.v = v
        self.g = g
        self.H = H

    @classmethod
    def variable(cls, value, index: int) -> "Jet":
        value = np.asarray(value)
        g = np.zeros(value.shape + (NVAR,), dtype=np.result_type(value, float))
        g[..., index] = 1.0
        H = np.zeros(value.shape + (NVAR, NVAR), dtype=g.dtype)
        return cls(value.astype(g.dtype), g, H)

    @classmethod
    def constant(cls, value) -> "Jet":
        value = np.asarray(value)
        dtype = np.result_type(value, float)
        return cls(value.astype(dtype), np.zeros(value.shape + (NVAR,), dtype),
                   np.zeros(value.shape + (NVAR, NVAR), dtype))

    @property
    def shape(self):
        return np.shape(self.v)

    def __repr__(self):
        return f"Jet(v={self.v!r})"

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.v + other.v, self.g + other.g, self.H + other.H)
        other = np.asarray(other)
        return Jet(self.v + other, self.g + np.zeros_like(_b(other, 1)),
                   self.H + np.zeros_like(_b(other, 2)))

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.g, -self.H)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self, other
            av1, bv1 = _b(a.v, 1), _b(b.v, 1)
            av2, bv2 = _b(a.v, 2), _b(b.v, 2)
            return Jet(a.v * b.v, av1 * b.g + bv1 * a.g,
                       av2 * b.H + bv2 * a.H + _outer(a.g, b.g) + _outer(b.g, a.g))
        other = np.asarray(other)
        return Jet(self.v * other, self.g * _b(other, 1), self.H * _b(other, 2))

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.v
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        p = float(p)
        if p == 2.0:
            return self * self
        if p == 1.0:
            return self
        u = self.v
        return self._chain(u ** p, p * u ** (p - 1.0), p * (p - 1.0) * u ** (p - 2.0))

    def __rpow__(self, base):
        return exp(self * np.log(base))

    def __abs__(self):
        s = np.sign(np.real(self.v))
        return self * s

    def _chain(self, f0, f1, f2):
        """Compose a scalar function with value/first/second derivative f0, f1, f2."""
        return Jet(f0, _b(f1, 1) * self.g,
                   _b(f1, 2) * self.H + _b(f2, 2) * _outer(self.g, self.g))

    # -- batch helpers ----------------------------------------------------
    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.v[idx], self.g[idx], self.H[idx])

    def weighted_sum(self, weights, axis: int = -1) -> "Jet":
        """Contract a batch axis against ``weights`` (quadrature rule)."""
        nb = np.ndim(self.v)
        ax = axis % nb
        w = np.asarray(weights)
        wv = w.reshape((-1,) + (1,) * (nb - 1 - ax))
        return Jet((self.v * wv).sum(axis=ax),
                   (self.g * wv[..., None]).sum(axis=ax),
                   (self.H * wv[..., None, None]).sum(axis=ax))


def _unary(u, fn, d1, d2):
    if isinstance(u, Jet):
        f0 = fn(u.v)
        return u._chain(f0, d1(u.v, f0), d2(u.v, f0))
    return fn(u)


def sqrt(u):
    return _unary(u, np.sqrt, lambda x, f: 0.5 / f, lambda x, f: -0.25 / (f * x))


def exp(u):
    return _unary(u, np.exp, lambda x, f: f, lambda x, f: f)


def log(u):
    return _unary(u, np.log, lambda x, f: 1.0 / x, lambda x, f: -1.0 / (x * x))


def sin(u):
    return _unary(u, np.sin, lambda x, f: np.cos(x), lambda x, f: -f)


def cos(u):
    return _unary(u, np.cos, lambda x, f: -np.sin(x), lambda x, f: -f)


def tanh(u):
    return _unary(u, np.tanh, lambda x, f: 1.0 - f * f, lambda x, f: -2.0 * f * (1.0 - f * f))


def where(cond, a, b):
    """Elementwise select over the batch; ``cond`` must be a real boolean array."""
    cond = np.asarray(cond)
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.where(cond, a, b)
    shape = np.broadcast_shapes(cond.shape, np.shape(a.v if isinstance(a, Jet) else a),
                                np.shape(b.v if isinstance(b, Jet) else b))
    a = a if isinstance(a, Jet) else Jet.constant(np.broadcast_to(a, shape))
    b = b if isinstance(b, Jet) else Jet.constant(np.broadcast_to(b, shape))
    return Jet(np.where(cond, a.v, b.v), np.where(_b(cond, 1), a.g, b.g),
               np.where(_b(cond, 2), a.H, b.H))


def value_of(u):
    """Plain value of a jet or number."""
    return u.v if isinstance(u, Jet) else u


@dataclass(frozen=True)
class Jet2Record:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    @property
    def grad_x(self):
        return self.gradient[:2]

    @property
    def grad_xi(self):
        return self.gradient[2:]

    @property
    def hess_xx(self):
        return self.hessian[:2, :2]

    @property
    def hess_xix(self):
        """Block ``[i, j] = d^2 f / dxi^i dx^j``."""
        return self.hessian[2:, :2]

    @property
    def hess_xixi(self):
        return self.hessian[2:, 2:]


class JetEvaluationError(ValueError):
    pass


def check_slit(p, atol: float = 1e-12) -> None:
    """Reject points on the zero section ``xi = 0``."""
    p = np.asarray(p)
    x_norm = np.hypot(np.real(p[0]), np.real(p[1]))
    if np.hypot(np.real(p[2]), np.real(p[3])) < atol * (1.0 + x_norm):
        raise JetEvaluationError(f"tangent vector too close to zero at {np.real(p)}")


def seed(p) -> list[Jet]:
    return [Jet.variable(p[k], k) for k in range(NVAR)]


def eval_jet2(f: ScalarField4, p) -> Jet2Record:
    """Value, gradient and Hessian of ``f`` at the 4-vector ``p``."""
    p = np.asarray(p)
    if p.shape != (NVAR,):
        raise ValueError(f"expected a 4-vector, got shape {p.shape}")
    check_slit(p)
    out = f(seed(p))
    if not isinstance(out, Jet):
        # f ignores its inputs
        out = Jet.constant(out)
    if np.ndim(out.v) != 0:
        raise JetEvaluationError("field returned a batched jet for a single point")
    if not np.isfinite(out.v):
        raise JetEvaluationError(f"non-finite value at {p}")
    bad = ~np.isfinite(out.H)
    if bad.any() or not np.all(np.isfinite(out.g)):
        if bad.any():
            i, j = np.argwhere(bad)[0]
            pair = (COORD_NAMES[i], COORD_NAMES[j])
        else:
            k = int(np.argwhere(~np.isfinite(out.g))[0][0])
            pair = (COORD_NAMES[k], COORD_NAMES[k])
        raise JetEvaluationError(f"non-finite derivative for pair {pair} at {p}")
    return Jet2Record(out.v[()], out.g, out.H)


def fd_crosscheck(f: ScalarField4, p, h: float = 1e-5) -> float:
    """Largest deviation between the jet of ``f`` and central finite differences."""
    if h <= 0:
        raise ValueError("step must be positive")
    p = np.asarray(p, dtype=float)
    rec = eval_jet2(f, p)

    def F(q):
        return float(value_of(f(list(q))))

    e = np.eye(NVAR) * h
    f0 = F(p)
    grad = np.empty(NVAR)
    hess = np.empty((NVAR, NVAR))
    for i in range(NVAR):
        fp, fm = F(p + e[i]), F(p - e[i])
        grad[i] = (fp - fm) / (2 * h)
        hess[i, i] = (fp - 2 * f0 + fm) / h ** 2
        for j in range(i):
            mixed = (F(p + e[i] + e[j]) - F(p + e[i] - e[j])
                     - F(p - e[i] + e[j]) + F(p - e[i] - e[j])) / (4 * h ** 2)
            hess[i, j] = hess[j, i] = mixed
    return float(max(abs(rec.value - f0), np.max(np.abs(rec.gradient - grad)),
                     np.max(np.abs(rec.hessian - hess))))


def compose(f0, f1, f2, args: Sequence[Jet]) -> Jet:
    """Jet of ``phi(args)`` given phi's value, gradient ``f1`` (m,) and Hessian ``f2`` (m, m)."""
    G = np.stack([a.g for a in args])            # (m, 4)
    g = np.tensordot(f1, G, axes=1)
    H = np.tensordot(f1, np.stack([a.H for a in args]), axes=1)
    H = H + G.T @ (f2 @ G)
    return Jet(np.asarray(f0), g, H)
