"""Scenario objects to hazard-multiplier (and recovery) paths.

Four layers: climate log-ratio multipliers, nature policy stress ratios,
the two-stage physical transmission (catch -> revenue -> margin -> credit),
and tail-generator hybrid deformations. Every layer maps the reference
scenario to m = 1 identically.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .credit_curves import RecoveryPath
from .errors import ValidationError
from .market_data import ProviderPathPanel

log = logging.getLogger(__name__)

# safety cap for the (unclipped) climate layer; hitting it is logged
CLIMATE_SAFETY_CAP = 1e6


@dataclass(frozen=True)
class MultiplierPath:
    grid: np.ndarray
    values: np.ndarray
    scenario_id: str
    clip_bounds: tuple = (0.0, np.inf)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != g.shape:
            raise ValidationError("grid/values length mismatch")
        lo, hi = self.clip_bounds
        if np.any(v < lo - 1e-12) or np.any(v > hi + 1e-12):
            raise ValidationError("multiplier outside clip bounds")
        if np.any(v <= 0):
            raise ValidationError("multipliers must be positive")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class TranslationConfig:
    """Elasticities, clips and two-stage parameters for all translation layers."""

    betas: dict = field(default_factory=lambda: {"GDP|PPP": -0.6, "Price|Carbon": 0.15})
    base_year: int = 2025
    policy_beta: float = 1.0
    policy_clip: tuple = (0.05, 20.0)
    # two-stage transmission
    omega: float = 1.0
    alpha_catch: float = 1.0
    alpha_price: float = 1.0
    cost_share: float = 0.65
    beta_pd: float = 2.0
    hazard_clip: tuple = (0.2, 8.0)
    k_recovery: float = 0.05
    recovery_base: float = 0.40
    recovery_bounds: tuple = (0.05, 0.60)
    tail_mode: str = "one_sided"

    def __post_init__(self):
        if not (0.0 <= self.omega <= 1.0):
            raise ValidationError("omega must lie in [0,1]")
        if not (0.0 < self.cost_share < 1.0):
            raise ValidationError("cost share must lie in (0,1)")
        for lo, hi in (self.policy_clip, self.hazard_clip):
            if lo <= 0 or lo >= hi:
                raise ValidationError("clip bounds must be positive with lo < hi")
        lo, hi = self.recovery_bounds
        if not (0.0 <= lo < hi <= 1.0):
            raise ValidationError("recovery bounds must lie in [0,1]")
        if self.tail_mode not in ("one_sided", "two_sided"):
            raise ValidationError("tail mode must be one_sided or two_sided")


@dataclass(frozen=True)
class TailFactorEnsemble:
    providers: list
    years: np.ndarray
    factors: np.ndarray  # providers x years
    mode: str

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=float)
        y = np.asarray(self.years, dtype=int)
        if f.shape != (len(self.providers), y.size):
            raise ValidationError("factor matrix shape mismatch")
        object.__setattr__(self, "years", y)
        object.__setattr__(self, "factors", f)


def annual_to_grid(years, annual_values, grid, base_year: int) -> np.ndarray:
    """Step function constant within each calendar year, flat beyond the last."""
    years = np.asarray(years, dtype=int)
    annual = np.asarray(annual_values, dtype=float)
    cal = base_year + np.floor(np.asarray(grid, dtype=float) + 1e-12).astype(int)
    idx = np.clip(np.searchsorted(years, cal, side="right") - 1, 0, years.size - 1)
    return annual[idx]


def climate_multiplier(grid, scenario_drivers: dict, reference_drivers: dict,
                       base_values_s: dict, base_values_ref: dict,
                       config: TranslationConfig, scenario_id: str) -> MultiplierPath:
    """Reference-relative log-ratio multiplier from per-driver grid values.

    m_abs(t) = exp(sum_k beta_k ln(x_k(t)/x_k(t0))); the returned path is
    m_abs_s / m_abs_ref. The climate layer is unclipped apart from an
    overflow safety cap.
    """
    grid = np.asarray(grid, dtype=float)
    log_m = np.zeros(grid.shape)
    for driver, beta in config.betas.items():
        xs = np.asarray(scenario_drivers[driver], dtype=float)
        xr = np.asarray(reference_drivers[driver], dtype=float)
        if np.any(xs <= 0) or np.any(xr <= 0):
            raise ValidationError(f"nonpositive driver values for {driver}")
        log_m += beta * (np.log(xs / base_values_s[driver])
                         - np.log(xr / base_values_ref[driver]))
    values = np.exp(log_m)
    if np.any(values > CLIMATE_SAFETY_CAP):
        log.warning("climate multiplier hit safety cap %g for %s", CLIMATE_SAFETY_CAP, scenario_id)
        values = np.minimum(values, CLIMATE_SAFETY_CAP)
    return MultiplierPath(grid, values, scenario_id)


def _stress(values: np.ndarray, base_value: float) -> np.ndarray:
    """Good-state stress: x(t0)/x(t), larger when the indicator deteriorates."""
    if np.any(values <= 0) or base_value <= 0:
        raise ValidationError("indicator values must be strictly positive")
    return base_value / values


def nature_policy_multiplier(grid, x_s, x_s_base: float, x_ref, x_ref_base: float,
                             config: TranslationConfig, scenario_id: str) -> MultiplierPath:
    """Policy multiplier clip(SR^beta, m_lo, m_hi) from a good-state indicator."""
    grid = np.asarray(grid, dtype=float)
    sr = _stress(np.asarray(x_s, float), x_s_base) / _stress(np.asarray(x_ref, float), x_ref_base)
    lo, hi = config.policy_clip
    values = np.clip(sr ** config.policy_beta, lo, hi)
    return MultiplierPath(grid, values, scenario_id, clip_bounds=config.policy_clip)


def two_stage_transmission(grid, catch_ratio, config: TranslationConfig,
                           scenario_id: str, price_proxy=None):
    """Physical catch ratio -> (hazard MultiplierPath, RecoveryPath).

    cr_eff = 1 + omega (cr - 1); mu = cr_eff^a_catch * pi^a_price;
    e = (mu - c)/(1 - c); u = -ln e; m = clip(exp(beta_pd u), hazard clip);
    R = clip(R0 - k_R max(u,0), recovery bounds). Margin wipe-out (e <= 0)
    saturates at (m_max, R_min) with a warning.
    """
    grid = np.asarray(grid, dtype=float)
    cr = np.asarray(catch_ratio, dtype=float)
    if np.any(cr <= 0):
        raise ValidationError("catch ratio must be strictly positive")
    pi = np.ones(grid.shape) if price_proxy is None else np.asarray(price_proxy, float)
    cr_eff = 1.0 + config.omega * (cr - 1.0)
    mu = cr_eff ** config.alpha_catch * pi ** config.alpha_price
    e = (mu - config.cost_share) / (1.0 - config.cost_share)

    m_lo, m_hi = config.hazard_clip
    r_lo, r_hi = config.recovery_bounds
    wiped = e <= 0
    if np.any(wiped):
        log.warning("margin wiped out at %d grid points for %s: saturating at clip bounds",
                    int(wiped.sum()), scenario_id)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(wiped, np.inf, -np.log(np.where(wiped, 1.0, e)))
    u_plus = np.maximum(u, 0.0)
    m = np.where(wiped, m_hi, np.clip(np.exp(config.beta_pd * np.where(wiped, 0.0, u)), m_lo, m_hi))
    rec = np.where(wiped, r_lo,
                   np.clip(config.recovery_base - config.k_recovery * np.where(wiped, 0.0, u_plus),
                           r_lo, r_hi))
    return (MultiplierPath(grid, m, scenario_id, clip_bounds=config.hazard_clip),
            RecoveryPath(grid, rec))


def tail_factors(panels: list[ProviderPathPanel], mode: str) -> TailFactorEnsemble:
    """f_i(t) = g_i(t) / median_j g_j(t); one-sided mode floors factors at 1."""
    if mode not in ("one_sided", "two_sided"):
        raise ValidationError("mode must be one_sided or two_sided")
    if len(panels) < 2:
        raise ValidationError("need at least 2 tail providers")
    years = panels[0].years
    for p in panels[1:]:
        if p.years.shape != years.shape or np.any(p.years != years):
            raise ValidationError("provider year grids do not match")
    g = np.vstack([p.stress_values for p in panels])
    factors = g / np.median(g, axis=0)[None, :]
    if mode == "one_sided":
        factors = np.maximum(factors, 1.0)
    return TailFactorEnsemble([p.provider_label for p in panels], years, factors, mode)


def hybrid_multiplier(grid, stress_s, stress_ref, factor_years, factor_values,
                      config: TranslationConfig, scenario_id: str,
                      base_year: int | None = None) -> MultiplierPath:
    """m(t) = clip((stress_s * f_i / stress_ref)^beta, policy clip bounds).

    Annual tail factors enter the engine grid as a step function over
    calendar years.
    """
    grid = np.asarray(grid, dtype=float)
    f = annual_to_grid(factor_years, factor_values, grid,
                       config.base_year if base_year is None else base_year)
    sr = np.asarray(stress_s, float) * f / np.asarray(stress_ref, float)
    lo, hi = config.policy_clip
    values = np.clip(sr ** config.policy_beta, lo, hi)
    return MultiplierPath(grid, values, scenario_id, clip_bounds=config.policy_clip)


def reference_multiplier(grid, scenario_id: str = "ref") -> MultiplierPath:
    grid = np.asarray(grid, dtype=float)
    return MultiplierPath(grid, np.ones(grid.shape), scenario_id)
