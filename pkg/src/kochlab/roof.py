"""Power-singular ceilings over the circle.

The one-singularity model is

    fbar(theta) = a * (theta^-g + (1 - theta)^-g) + b,    b = 1 - 2a / (1 - g),

which has mean one and ``fbar''(theta) * theta^(2+g) -> a g (g + 1)``.
A composite roof adds translated copies, ``f(theta) = sum_i fbar(theta - c_i)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, PositivityError, SingularityError


def _reduce(theta):
    """Return (t1, t2) = (theta mod 1, -theta mod 1) computed separately.

    Using both reductions keeps full relative precision on whichever side
    of the singularity the point sits.
    """
    y = np.asarray(theta, dtype=np.float64)
    return np.mod(y, 1.0), np.mod(-y, 1.0)


@dataclass(frozen=True)
class SingularRoof:
    gamma: float
    coeff_a: float
    offset_b: float
    asymptotic_A: float

    @property
    def min_value(self) -> float:
        """Value at theta = 1/2, the minimum of the convex symmetric model."""
        return 2.0 ** (1.0 + self.gamma) * self.coeff_a + self.offset_b

    def eval(self, theta, order: int = 0):
        t1, t2 = _reduce(theta)
        if np.any((t1 == 0.0) | (t2 == 0.0)):
            raise SingularityError("roof evaluated at its singular point 0")
        g, a = self.gamma, self.coeff_a
        if order == 0:
            out = a * (t1 ** -g + t2 ** -g) + self.offset_b
        elif order == 1:
            out = a * g * (t2 ** (-g - 1.0) - t1 ** (-g - 1.0))
        elif order == 2:
            out = self.asymptotic_A * (t1 ** (-g - 2.0) + t2 ** (-g - 2.0))
        else:
            raise DomainError("order must be 0, 1 or 2")
        return out if np.ndim(out) else float(out)

    def centered(self, theta):
        """fbar_0 = fbar - 1."""
        return self.eval(theta, 0) - 1.0

    def __call__(self, theta):
        return self.eval(theta, 0)


def make_singular_roof(gamma: float = 1 / 3, coeff_a: float = 0.1) -> SingularRoof:
    if not (0.0 < gamma < 0.5):
        raise DomainError(f"gamma must lie in (0, 1/2), got {gamma}")
    if coeff_a <= 0:
        raise DomainError(f"coeff_a must be positive, got {coeff_a}")
    b = 1.0 - 2.0 * coeff_a / (1.0 - gamma)
    roof = SingularRoof(float(gamma), float(coeff_a), b, coeff_a * gamma * (gamma + 1.0))
    if roof.min_value <= 0:
        raise PositivityError(
            f"roof minimum 2^(1+g) a + b = {roof.min_value:.6g} is not positive")
    return roof


def eval_roof(roof: SingularRoof, theta, order: int = 0):
    return roof.eval(theta, order)


def _compensated_sum(terms):
    total = None
    comp = None
    for t in terms:
        if total is None:
            total = np.array(t, dtype=np.float64, copy=True)
            comp = np.zeros_like(total)
            continue
        s = total + t
        big = np.abs(total) >= np.abs(t)
        comp += np.where(big, (total - s) + t, (t - s) + total)
        total = s
    return total + comp


@dataclass(frozen=True)
class CompositeRoof:
    base: SingularRoof
    singularities: tuple = field(default=(0.0,))

    def __post_init__(self):
        cs = tuple(float(np.mod(c, 1.0)) for c in self.singularities)
        if not cs:
            raise DomainError("need at least one singularity")
        object.__setattr__(self, "singularities", cs)

    @property
    def count(self) -> int:
        return len(self.singularities)

    @property
    def gamma(self) -> float:
        return self.base.gamma

    def eval(self, theta, order: int = 0):
        theta = np.asarray(theta, dtype=np.float64)
        terms = (self.base.eval(theta - c, order) for c in self.singularities)
        if self.count <= 8:
            out = sum(terms)
        else:
            out = _compensated_sum(terms)
        return out if np.ndim(out) else float(out)

    def __call__(self, theta):
        return self.eval(theta, 0)

    def distance_to_singularities(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        d = None
        for c in self.singularities:
            r = np.mod(theta - c, 1.0)
            r = np.minimum(r, 1.0 - r)
            d = r if d is None else np.minimum(d, r)
        return d

    @cached_property
    def _minimizers(self):
        cs = sorted(self.singularities)
        out = []
        for i, c in enumerate(cs):
            right = cs[i + 1] if i + 1 < len(cs) else cs[0] + 1.0
            w = right - c
            if w <= 0:
                raise DomainError("coincident singularities")
            lo, hi = c + w * 1e-12, right - w * 1e-12
            df = lambda t: self.eval(t, 1)
            if df(lo) >= 0 or df(hi) <= 0:
                x = c + w / 2
            else:
                x = optimize.brentq(df, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
            out.append((x % 1.0, self.eval(x, 0)))
        return tuple(out)

    @property
    def inf_value(self) -> float:
        """inf f, from the unique critical point of f in each gap."""
        return min(v for _, v in self._minimizers)

    @property
    def inv_inf(self) -> float:
        """C = 1 / inf f."""
        return 1.0 / self.inf_value

    @cached_property
    def farthest_point(self) -> float:
        """Circle point maximizing the distance to all singularities."""
        cs = sorted(self.singularities)
        best, best_gap = 0.0, -1.0
        for i, c in enumerate(cs):
            right = cs[i + 1] if i + 1 < len(cs) else cs[0] + 1.0
            if right - c > best_gap:
                best_gap, best = right - c, (c + (right - c) / 2) % 1.0
        return best


def eval_composite(f: CompositeRoof, theta, order: int = 0):
    return f.eval(theta, order)


def circle_integral(fun: Callable[[float], float], singular_points: Sequence[float],
                    epsabs: float = 1e-13, epsrel: float = 1e-12) -> float:
    """Integrate ``fun`` over [0, 1) allowing integrable power singularities.

    The circle is cut at each singular point and at the midpoints between
    them.  On each half-gap the substitution d = h s^5 removes the blow-up
    (any singularity weaker than d^-(4/5) becomes bounded) before handing the
    piece to adaptive Gauss-Kronrod.  Points closer than a few ulps to a
    singularity are not representable, so an error of order ulp^(1 - gamma)
    remains (about 1e-11 at gamma = 1/3, 1e-9 at gamma = 0.45).
    """
    cs = sorted(float(np.mod(c, 1.0)) for c in singular_points) or [0.0]
    total = []
    for i, c in enumerate(cs):
        right = cs[i + 1] if i + 1 < len(cs) else cs[0] + 1.0
        h = (right - c) / 2
        if h <= 0:
            continue
        # keep the offset a few ulps away so c + d never rounds back onto c
        tiny = 4 * np.spacing(max(1.0, abs(right)))
        left_piece = lambda s, c=c, h=h: fun(c + max(h * s ** 5, tiny)) * 5 * h * s ** 4
        right_piece = lambda s, r=right, h=h: fun(r - max(h * s ** 5, tiny)) * 5 * h * s ** 4
        for g in (left_piece, right_piece):
            val, _ = integrate.quad(g, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, limit=400)
            total.append(val)
    return math.fsum(total)


def roof_cos_moment(roof: SingularRoof, k: int) -> float:
    """int_0^1 fbar(theta) cos(2 pi k theta) d theta."""
    if k == 0:
        return 1.0
    w = 2 * math.pi * k
    val, _ = integrate.quad(lambda t: math.cos(w * t), 0.0, 1.0, weight="alg",
                            wvar=(-roof.gamma, 0.0), epsabs=1e-14, epsrel=1e-12, limit=400)
    return 2.0 * roof.coeff_a * val
