"""Baseline hazard calibration and scenario survival curves.

Intensities are piecewise constant on the engine grid: lambda(t) = lambda_i
for t in [t_i, t_{i+1}). The baseline is flat, calibrated from a single CDS
par spread; scenarios rescale it through multiplier paths.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NumericError, ValidationError
from .market_data import DiscountCurve


@dataclass(frozen=True)
class HazardCurve:
    grid: np.ndarray
    intensities: np.ndarray
    scenario_id: str = "base"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        lam = np.asarray(self.intensities, dtype=float)
        if g[0] != 0.0 or np.any(np.diff(g) <= 0):
            raise ValidationError("hazard grid must start at 0 and be increasing")
        if lam.shape != g.shape:
            raise ValidationError("grid/intensity length mismatch")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ValidationError("intensities must be finite and nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "intensities", lam)


@dataclass(frozen=True)
class SurvivalCurve:
    grid: np.ndarray
    survival: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        s = np.asarray(self.survival, dtype=float)
        if s[0] != 1.0:
            raise ValidationError("S(0) must equal 1")
        if np.any(np.diff(s) > 0) or np.any(s <= 0) or np.any(s > 1):
            raise ValidationError("survival must be non-increasing in (0,1]")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "survival", s)


@dataclass(frozen=True)
class RecoveryPath:
    grid: np.ndarray
    recovery: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        r = np.asarray(self.recovery, dtype=float)
        if r.shape != g.shape:
            raise ValidationError("grid/recovery length mismatch")
        if np.any(r < 0) or np.any(r > 1):
            raise ValidationError("recovery values must lie in [0,1]")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "recovery", r)

    @classmethod
    def constant(cls, grid, value: float) -> "RecoveryPath":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.full(grid.shape, float(value)))


def flat_hazard_curve(grid, lam: float, scenario_id: str = "base") -> HazardCurve:
    grid = np.asarray(grid, dtype=float)
    return HazardCurve(grid, np.full(grid.shape, float(lam)), scenario_id)


def _cds_legs(lam: float, recovery: float, maturity: float,
              premium_frequency: int, discount: DiscountCurve):
    """Premium-leg annuity (per unit spread) and protection leg for flat lambda.

    Quarterly (or configured) premium accrual, default payment at interval
    midpoint, accrued-on-default at half an accrual period.
    """
    n = int(round(maturity * premium_frequency))
    times = np.arange(1, n + 1) / premium_frequency
    accruals = np.full(n, 1.0 / premium_frequency)
    mids = times - 0.5 / premium_frequency
    surv = np.exp(-lam * times)
    surv_prev = np.exp(-lam * np.concatenate(([0.0], times[:-1])))
    dflt = surv_prev - surv
    annuity = float(np.sum(accruals * discount.df(times) * surv)
                    + np.sum(0.5 * accruals * discount.df(mids) * dflt))
    protection = float((1.0 - recovery) * np.sum(discount.df(mids) * dflt))
    return annuity, protection


def cds_par_spread(lam: float, recovery: float, maturity: float,
                   premium_frequency: int, discount: DiscountCurve) -> float:
    annuity, protection = _cds_legs(lam, recovery, maturity, premium_frequency, discount)
    return protection / annuity


def calibrate_flat_hazard(par_spread: float, recovery: float, maturity: float,
                          premium_frequency: int, discount: DiscountCurve) -> float:
    """Flat intensity solving premium leg = protection leg for a par CDS."""
    if not 0.0 <= recovery < 1.0:
        raise ValidationError("recovery must lie in [0,1)")
    if par_spread < 0:
        raise ValidationError("par spread must be nonnegative")
    if par_spread == 0.0:
        return 0.0

    def gap(lam):
        annuity, protection = _cds_legs(lam, recovery, maturity, premium_frequency, discount)
        return par_spread * annuity - protection

    lo, hi = 1e-8, 10.0
    if gap(lo) * gap(hi) > 0:
        raise NumericError("no sign change in hazard bracket [1e-8, 10]")
    return float(brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14))


def survival_curve(hazard: HazardCurve) -> SurvivalCurve:
    """S(t_i) = exp(-sum_{j<i} lambda_j * dt_j)."""
    dts = np.diff(hazard.grid)
    cum = np.concatenate(([0.0], np.cumsum(hazard.intensities[:-1] * dts)))
    return SurvivalCurve(hazard.grid, np.exp(-cum))


def apply_multiplier(base: HazardCurve, multiplier) -> HazardCurve:
    """Pointwise lambda_s(t) = m_s(t) * lambda_0(t); grids must align."""
    grid = np.asarray(multiplier.grid, dtype=float)
    if grid.shape != base.grid.shape or not np.allclose(grid, base.grid, atol=1e-12):
        raise ValidationError("multiplier grid does not match hazard grid")
    return HazardCurve(base.grid, base.intensities * np.asarray(multiplier.values, dtype=float),
                       scenario_id=multiplier.scenario_id)


def interval_default_probs(surv: SurvivalCurve):
    """Interval masses dp_i = S(t_{i-1}) - S(t_i) and the terminal survivor mass."""
    dp = -np.diff(surv.survival)
    return dp, float(surv.survival[-1])
