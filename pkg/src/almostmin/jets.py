"""Truncated Taylor (jet) arithmetic in one variable, vectorized over points.

A :class:`Jet` of order ``K`` at a point ``t`` stores the normalized Taylor
coefficients ``c[j] = f^(j)(t) / j!`` for ``j = 0..K``.  Arithmetic on jets is
exact up to round-off, so derivatives obtained this way carry no
finite-difference noise.
"""

from __future__ import annotations

from math import factorial

import numpy as np


class Jet:
    __slots__ = ("coef",)

    def __init__(self, coef):
        self.coef = np.asarray(coef, dtype=float)

    @property
    def order(self):
        return self.coef.shape[0] - 1

    @classmethod
    def variable(cls, t, order):
        t = np.asarray(t, dtype=float)
        coef = np.zeros((order + 1,) + t.shape)
        coef[0] = t
        if order >= 1:
            coef[1] = 1.0
        return cls(coef)

    @classmethod
    def constant(cls, c, order, shape=()):
        coef = np.zeros((order + 1,) + np.shape(c) + tuple(shape))
        coef[0] = c
        return cls(coef)

    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        coef = np.zeros_like(self.coef)
        coef[0] = other
        return Jet(coef)

    def __add__(self, other):
        return Jet(self.coef + self._lift(other).coef)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coef)

    def __sub__(self, other):
        return Jet(self.coef - self._lift(other).coef)

    def __rsub__(self, other):
        return Jet(self._lift(other).coef - self.coef)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coef * other)
        a, b = self.coef, other.coef
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for j in range(out.shape[0]):
            for i in range(j + 1):
                out[j] += a[i] * b[j - i]
        return Jet(out)

    __rmul__ = __mul__

    def reciprocal(self):
        b = self.coef
        out = np.zeros_like(b)
        out[0] = 1.0 / b[0]
        for j in range(1, b.shape[0]):
            acc = np.zeros_like(b[0])
            for i in range(1, j + 1):
                acc += b[i] * out[j - i]
            out[j] = -acc / b[0]
        return Jet(out)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coef / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def exp(self):
        f = self.coef
        out = np.zeros_like(f)
        out[0] = np.exp(f[0])
        for j in range(1, f.shape[0]):
            acc = np.zeros_like(f[0])
            for i in range(1, j + 1):
                acc += i * f[i] * out[j - i]
            out[j] = acc / j
        return Jet(out)

    def derivatives(self):
        """Array of derivatives ``f^(j)(t)`` for ``j = 0..order``."""
        scale = np.array([factorial(j) for j in range(self.order + 1)], dtype=float)
        return self.coef * scale.reshape((-1,) + (1,) * (self.coef.ndim - 1))


# Below this argument exp(-1/s) and all its derivatives are < 1e-400.
_FLAT_CUTOFF = 1e-3


def _flat_exp(s):
    """Jet of e(s) = exp(-1/s) for s > 0 and 0 otherwise."""
    coef = np.zeros_like(s.coef)
    live = s.coef[0] > _FLAT_CUTOFF
    if np.any(live):
        sub = Jet(s.coef[:, live])
        coef[:, live] = (-(sub.reciprocal())).exp().coef
    return Jet(coef)


def smoothstep(s):
    """Jet of S(s) = e(s) / (e(s) + e(1 - s)), equal to 0 for s<=0, 1 for s>=1."""
    a = _flat_exp(s)
    b = _flat_exp(1.0 - s)
    return a / (a + b)


def bump_profile_derivatives(t, order, plateau=0.5, support=0.6):
    """Derivatives up to ``order`` of the 1-d cutoff profile psi at ``t``.

    psi = 1 on [-plateau, plateau], psi = 0 outside (-support, support), and
    psi(t) = S((support - |t|) / (support - plateau)) in between.

    Returns an array of shape ``(order + 1,) + t.shape``.
    """
    t = np.asarray(t, dtype=float)
    width = support - plateau
    out = np.zeros((order + 1,) + t.shape)
    a = np.abs(t)
    out[0][a <= plateau] = 1.0
    ramp = (a > plateau) & (a < support)
    if np.any(ramp):
        sign = np.sign(t[ramp])
        u = Jet.variable(t[ramp], order)
        s = (support - u * sign) / width
        out[:, ramp] = smoothstep(s).derivatives()
    return out
