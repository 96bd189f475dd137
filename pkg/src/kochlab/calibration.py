"""Fitting the frozen constants used by the dk0, orbital and analytic_difference suites.

Calibration uses its own seed (CALIBRATION_SEED), never the seed of an
acceptance run.  Fitted values are rounded up to two significant digits
and copied by hand into CalibrationCfg; suites then allow 2x headroom.
"""
from __future__ import annotations

import math

import numpy as np

from . import birkhoff as bk
from . import cocycle as cc
from .config import ExperimentConfig
from .suites import Context

CALIBRATION_SEED = 101


def round_up(x: float, digits: int = 2) -> float:
    if x <= 0:
        return 0.0
    e = math.floor(math.log10(x)) - digits + 1
    return math.ceil(x / 10 ** e) * 10 ** e


def fit_dk0(ctx: Context, seed: int = CALIBRATION_SEED) -> float:
    c = ctx.cfg.dk0
    xs = np.random.default_rng(seed).random(c.points)
    r = bk.dk0_residual_scan(ctx.roof, ctx.cf, [2 ** k for k in c.N_exponents], xs)
    return max(r.max_ratio[1:] if r.N_grid[0] == 1 else r.max_ratio)


def fit_orbital(ctx: Context, seed: int = CALIBRATION_SEED) -> float:
    c = ctx.cfg.orbital
    return cc.compare_orbital_methods(ctx.flow, ctx.bump, c.T, c.points, seed).fitted_C


def fit_analytic(ctx: Context, seed: int = CALIBRATION_SEED) -> float:
    c = ctx.cfg.analytic_difference
    r = cc.check_analytic_difference(ctx.flow, ctx.bump, ctx.analytic, c.T_grid, c.samples,
                                     seed, c.exclusion_exponent)
    return max(r.q99_ratio)


def fit_calibration(cfg: ExperimentConfig, seed: int = CALIBRATION_SEED,
                    which=("dk0_ratio", "orbital_C", "analytic_quantile")) -> dict:
    """Raw fitted values and the rounded constants to freeze."""
    ctx = Context(cfg)
    fits = {"dk0_ratio": fit_dk0, "orbital_C": fit_orbital, "analytic_quantile": fit_analytic}
    raw = {k: float(fits[k](ctx, seed)) for k in which}
    return {"seed": seed, "raw": raw, "frozen": {k: round_up(v) for k, v in raw.items()}}
