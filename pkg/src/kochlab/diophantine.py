"""Continued fractions, convergent denominators and rotation orbits.

Denominators follow the usual convention ``q_0 = 1``, ``q_1 = a_1`` and
``q_{n+1} = a_{n+1} q_n + q_{n-1}``.  For the golden mean this gives the
Fibonacci table ``1, 1, 2, 3, 5, ...``.

Irrational inputs are handled in one of two ways.  Named quadratic
irrationals carry their exact periodic quotients.  Decimal strings and
floats are expanded with interval arithmetic: both ends of the uncertainty
interval are expanded together, and expansion stops with
:class:`PrecisionError` as soon as they disagree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Sequence, Union

import mpmath
import numpy as np

from .errors import DepthError, DomainError, PrecisionError

AlphaLike = Union[str, float, Fraction, "ContinuedFraction"]

# name -> (periodic quotient block, mpmath expression)
NAMED_CONSTANTS = {
    "golden": ((1,), lambda: (mpmath.sqrt(5) - 1) / 2),
    "sqrt2": ((2,), lambda: mpmath.sqrt(2) - 1),
    "sqrt3": ((1, 2), lambda: mpmath.sqrt(3) - 1),
}

_SPLIT = float(2 ** 26)
_MAX_PHASE_INDEX = 2 ** 27


@dataclass(frozen=True)
class ContinuedFraction:
    """Expansion of a rotation number ``alpha`` in (0, 1).

    ``alpha_lo`` is the correction ``alpha_exact - alpha`` (a double-double
    tail); it is zero for floats and nonzero for named constants and
    decimal strings.
    """

    alpha: float
    partial_quotients: tuple
    denominators: tuple
    numerators: tuple
    alpha_lo: float = 0.0
    label: str = ""

    @property
    def depth(self) -> int:
        return len(self.partial_quotients)

    def q(self, n: int) -> int:
        return self.denominators[n]

    def a(self, n: int) -> int:
        """Partial quotient a_n, 1-based as in the recursion."""
        return self.partial_quotients[n - 1]


@dataclass(frozen=True)
class DiophantineCertificate:
    alpha: float
    constant_C: float
    checked_depth: int
    passed: bool
    worst_ratio: float
    first_failure: int | None = None
    ratios: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class OstrovskiDigits:
    """Greedy digits ``b_0..b_top`` with ``N = sum b_k q_k``."""

    target: int
    digits: tuple
    cf: ContinuedFraction = field(repr=False)

    @property
    def top(self) -> int:
        return len(self.digits) - 1

    def reconstruct(self) -> int:
        return sum(b * self.cf.denominators[k] for k, b in enumerate(self.digits))

    @property
    def nonzero(self) -> int:
        return sum(1 for b in self.digits if b)


def _tables(quotients: Sequence[int]):
    q_prev, q = 0, 1
    p_prev, p = 1, 0
    qs, ps = [q], [p]
    for a in quotients:
        q_prev, q = q, a * q + q_prev
        p_prev, p = p, a * p + p_prev
        qs.append(q)
        ps.append(p)
    return tuple(qs), tuple(ps)


def _hi_lo(value: Fraction) -> tuple[float, float]:
    hi = float(value)
    lo = float(value - Fraction(hi))
    return hi, lo


def _parse_interval(alpha) -> tuple[Fraction, Fraction, str]:
    """Return an enclosure [lo, hi] of the number described by ``alpha``."""
    if isinstance(alpha, Fraction):
        return alpha, alpha, str(alpha)
    if isinstance(alpha, (int, np.integer)):
        v = Fraction(int(alpha))
        return v, v, str(alpha)
    if isinstance(alpha, (float, np.floating)):
        x = float(alpha)
        if not math.isfinite(x):
            raise DomainError(f"alpha must be finite, got {x}")
        half = Fraction(math.ulp(x)) / 2
        v = Fraction(x)
        return v - half, v + half, repr(x)
    if isinstance(alpha, str):
        s = alpha.strip()
        if "/" in s:
            v = Fraction(s)
            return v, v, s
        try:
            d = Decimal(s)
        except Exception as exc:
            raise DomainError(f"cannot parse alpha {alpha!r}") from exc
        v = Fraction(d)
        exp = d.as_tuple().exponent
        half = Fraction(10) ** exp / 2 if exp < 0 else Fraction(1, 2)
        return v - half, v + half, s
    raise DomainError(f"unsupported alpha type {type(alpha).__name__}")


def cf_expand(alpha: AlphaLike, depth: int) -> ContinuedFraction:
    """Expand ``alpha`` to ``depth`` partial quotients.

    ``alpha`` may be a named constant (``"golden"``, ``"sqrt2"``), an exact
    ``Fraction`` (or ``"p/q"`` string), a decimal string, or a float.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    if isinstance(alpha, ContinuedFraction):
        if alpha.depth < depth:
            raise DepthError(f"table has depth {alpha.depth} < {depth}")
        return truncate(alpha, depth)
    if isinstance(alpha, str) and alpha.strip().lower() in NAMED_CONSTANTS:
        name = alpha.strip().lower()
        block, expr = NAMED_CONSTANTS[name]
        quotients = tuple(block[i % len(block)] for i in range(depth))
        with mpmath.workdps(50):
            v = expr()
            hi = float(v)
            lo = float(v - mpmath.mpf(hi))
        qs, ps = _tables(quotients)
        return ContinuedFraction(hi, quotients, qs, ps, lo, name)

    lo, hi, label = _parse_interval(alpha)
    if not (0 < lo and hi < 1):
        raise DomainError(f"alpha must lie in (0, 1), got {label}")
    mid_hi, mid_lo = _hi_lo((lo + hi) / 2)
    quotients = []
    x_lo, x_hi = lo, hi
    for k in range(depth):
        if x_lo <= 0:
            if x_hi == 0:
                raise PrecisionError(
                    f"rational alpha terminates after {k} quotients (< depth {depth})")
            raise PrecisionError(f"precision exhausted at quotient {k + 1}")
        a_small = math.floor(1 / x_hi)
        a_big = math.floor(1 / x_lo)
        if a_small != a_big:
            raise PrecisionError(
                f"precision exhausted at quotient {k + 1}: candidates {a_small}..{a_big}")
        quotients.append(a_small)
        x_lo, x_hi = 1 / x_hi - a_small, 1 / x_lo - a_small
    quotients = tuple(quotients)
    qs, ps = _tables(quotients)
    return ContinuedFraction(mid_hi, quotients, qs, ps, mid_lo, label)


def cf_from_quotients(quotients: Sequence[int], label: str = "synthetic") -> ContinuedFraction:
    """Build a table from explicit quotients; alpha is the finite value."""
    quotients = tuple(int(a) for a in quotients)
    if not quotients or min(quotients) < 1:
        raise DomainError("quotients must be positive integers")
    qs, ps = _tables(quotients)
    hi, lo = _hi_lo(Fraction(ps[-1], qs[-1]))
    return ContinuedFraction(hi, quotients, qs, ps, lo, label)


def truncate(cf: ContinuedFraction, depth: int) -> ContinuedFraction:
    return ContinuedFraction(cf.alpha, cf.partial_quotients[:depth],
                             cf.denominators[:depth + 1], cf.numerators[:depth + 1],
                             cf.alpha_lo, cf.label)


def is_diophantine_D(cf: ContinuedFraction, C: float) -> DiophantineCertificate:
    """Check q_{n+1} <= C q_n max(1, ln^2 q_n) along the table."""
    if cf.depth < 2:
        raise DepthError("need depth >= 2")
    if C <= 0:
        raise DomainError("C must be positive")
    qs = cf.denominators
    ratios = []
    for n in range(len(qs) - 1):
        ratios.append(qs[n + 1] / (qs[n] * max(1.0, math.log(qs[n]) ** 2)))
    worst = max(ratios)
    first = next((n for n, r in enumerate(ratios) if r > C), None)
    return DiophantineCertificate(cf.alpha, float(C), cf.depth, first is None,
                                  worst, first, tuple(ratios))


def ostrovski_expand(N: int, cf: ContinuedFraction) -> OstrovskiDigits:
    """Greedy expansion N = sum_k b_k q_k, largest denominators first."""
    N = int(N)
    if N < 1:
        raise DomainError("N must be positive")
    qs = cf.denominators
    if N >= qs[-1]:
        raise DepthError(f"N = {N} needs denominators beyond q_{len(qs) - 1} = {qs[-1]}")
    top = max(k for k, q in enumerate(qs) if q <= N)
    digits = [0] * (top + 1)
    r = N
    for k in range(top, -1, -1):
        digits[k], r = divmod(r, qs[k])
    return OstrovskiDigits(N, tuple(digits), cf)


def _alpha_parts(alpha) -> tuple[float, float]:
    if isinstance(alpha, ContinuedFraction):
        hi, lo = alpha.alpha, alpha.alpha_lo
    else:
        hi, lo = float(alpha), 0.0
    head = math.floor(hi * _SPLIT) / _SPLIT
    return head, (hi - head) + lo


def rotation_phases(alpha, count: int, start: int = 0) -> np.ndarray:
    """frac(j * alpha) for j in [start, start + count), accurate to ~1e-16.

    alpha is split into a 26-bit head (whose integer multiples are exact)
    and a small tail, so the error does not grow with j.
    """
    if abs(start) >= _MAX_PHASE_INDEX or abs(start + count) >= _MAX_PHASE_INDEX:
        raise PrecisionError("orbit index beyond the exact-phase range 2^27")
    head, tail = _alpha_parts(alpha)
    j = np.arange(start, start + count, dtype=np.float64)
    out = np.mod(j * head, 1.0)
    out += j * tail
    np.mod(out, 1.0, out=out)
    return out


def rotate(x, n, alpha) -> np.ndarray:
    """frac(x + n * alpha) for integer arrays n (accurate phases)."""
    n = np.asarray(n)
    head, tail = _alpha_parts(alpha)
    nf = n.astype(np.float64)
    if nf.size and np.max(np.abs(nf)) >= _MAX_PHASE_INDEX:
        raise PrecisionError("orbit index beyond the exact-phase range 2^27")
    ph = np.mod(nf * head, 1.0) + nf * tail
    return np.mod(np.asarray(x, dtype=np.float64) + ph, 1.0)


def circle_distance(x) -> np.ndarray:
    """Distance to the nearest integer."""
    r = np.mod(x, 1.0)
    return np.minimum(r, 1.0 - r)


def min_orbit_distance(x: float, N: int, alpha, chunk: int = 1 << 20) -> tuple[int, float]:
    """Naive scan for argmin_{0<=j<N} ||x + j alpha||; ties go to the smallest j."""
    if N < 1:
        raise DomainError("N must be >= 1")
    best_j, best_d = 0, math.inf
    for start in range(0, N, chunk):
        cnt = min(chunk, N - start)
        d = circle_distance(float(x) + rotation_phases(alpha, cnt, start))
        k = int(np.argmin(d))
        if d[k] < best_d:
            best_j, best_d = start + k, float(d[k])
    return best_j, best_d


def min_orbit_distances(xs, N: int, alpha, chunk: int = 1 << 22) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`min_orbit_distance` over an array of base points."""
    xs = np.asarray(xs, dtype=np.float64)
    best_d = np.full(xs.shape, np.inf)
    best_j = np.zeros(xs.shape, dtype=np.int64)
    step = max(1, chunk // max(1, xs.size))
    for start in range(0, N, step):
        cnt = min(step, N - start)
        ph = rotation_phases(alpha, cnt, start)
        d = circle_distance(xs[..., None] + ph)
        k = np.argmin(d, axis=-1)
        dk = np.take_along_axis(d, k[..., None], axis=-1)[..., 0]
        better = dk < best_d
        best_d = np.where(better, dk, best_d)
        best_j = np.where(better, start + k, best_j)
    return best_j, best_d
