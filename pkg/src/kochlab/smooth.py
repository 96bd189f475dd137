"""Compactly supported C^3 bumps with closed-form antiderivatives.

All bumps are built from the degree-7 smoothstep
S(s) = 35 s^4 - 84 s^5 + 70 s^6 - 20 s^7 on [0, 1], which has three
vanishing derivatives at both ends and satisfies S(1 - s) = 1 - S(s).
"""
from __future__ import annotations

import numpy as np


def smoothstep(s):
    s = np.clip(np.asarray(s, dtype=np.float64), 0.0, 1.0)
    s2 = s * s
    return s2 * s2 * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)))


def smoothstep_integral(s):
    """R(s) = int_0^s S, extended by R(s) = 0 for s < 0 and 1/2 + (s - 1) for s > 1."""
    s = np.asarray(s, dtype=np.float64)
    c = np.clip(s, 0.0, 1.0)
    c5 = c ** 5
    poly = c5 * (7.0 + c * (-14.0 + c * (10.0 - 2.5 * c)))
    return poly + np.maximum(s - 1.0, 0.0)


def bump(x, center, half_width):
    """1 - S(|x - c| / h): value 1 at the center, support [c - h, c + h]."""
    r = np.abs(np.asarray(x, dtype=np.float64) - center) / half_width
    return 1.0 - smoothstep(r)


def bump_cumulative(x, center, half_width):
    """int_{-inf}^x bump; equals half_width for x beyond the support."""
    h = half_width
    z = (np.asarray(x, dtype=np.float64) - center) / h
    r = np.clip(np.abs(z), 0.0, 1.0)
    left = h * ((1.0 - r) - 0.5 + smoothstep_integral(r))
    right = h * (0.5 + r - smoothstep_integral(r))
    return np.where(z < 0, left, right)


def plateau(r):
    """1 on [0, 1], smooth decay on [1, 2], 0 beyond (r >= 0)."""
    return 1.0 - smoothstep(np.asarray(r, dtype=np.float64) - 1.0)


def circle_bump(theta, center, half_width):
    d = np.mod(np.asarray(theta, dtype=np.float64) - center + 0.5, 1.0) - 0.5
    return 1.0 - smoothstep(np.abs(d) / half_width)
