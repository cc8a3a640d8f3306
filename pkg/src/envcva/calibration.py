"""Choosing the KL budget from market co-movements.

Step 1 estimates a stressed dependence target from rolling Kendall tau
between a transition-risk proxy and credit-spread changes, mapped to the
Gaussian-copula latent-correlation scale. Step 2 matches KL add-ons to
Gaussian-copula add-ons on the same scenario-relative object and inverts
the map at the target.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .credit_curves import SurvivalCurve, interval_default_probs
from .cva import CvaResult, empirical_var, sample_losses
from .errors import DataError, NumericError, ValidationError
from .exposure import ExposureCube
from .market_data import DailySeries
from .robust import solve_kl_bound


@dataclass(frozen=True)
class DependenceTarget:
    rho_target: float
    regime: str
    window: int
    quantile: float
    side: str

    def __post_init__(self):
        if not 0.0 <= self.rho_target <= 1.0:
            raise ValidationError("rho target must lie in [0,1]")


@dataclass(frozen=True)
class EquivalenceCurve:
    """Scenario-relative add-ons on the rho and epsilon grids, and rho_equiv."""

    rho_grid: np.ndarray
    addon_rho: np.ndarray
    eps_grid: np.ndarray
    addon_eps: np.ndarray
    rho_equiv: np.ndarray


@dataclass(frozen=True)
class RollingDependence:
    dates: list
    rho: np.ndarray
    rho_long: np.ndarray
    rho_short: np.ndarray
    skipped_windows: int


def _knight_counts(x: np.ndarray, y: np.ndarray):
    """Concordant-minus-discordant and tie counts via Knight's algorithm."""
    n = x.size
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]

    def _tie_pairs(sorted_vals):
        _, counts = np.unique(sorted_vals, return_counts=True)
        return int(np.sum(counts * (counts - 1) // 2))

    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n2 = _tie_pairs(np.sort(y))
    # joint ties
    pair_view = np.stack([xs, ys], axis=1)
    _, joint_counts = np.unique(pair_view, axis=0, return_counts=True)
    n3 = int(np.sum(joint_counts * (joint_counts - 1) // 2))

    # strict inversions of ys under merge sort
    def _merge_count(a):
        if a.size <= 1:
            return a, 0
        mid = a.size // 2
        left, cl = _merge_count(a[:mid])
        right, cr = _merge_count(a[mid:])
        merged = np.empty_like(a)
        count = cl + cr
        i = j = k = 0
        while i < left.size and j < right.size:
            if right[j] < left[i]:
                count += left.size - i
                merged[k] = right[j]
                j += 1
            else:
                merged[k] = left[i]
                i += 1
            k += 1
        if i < left.size:
            merged[k:] = left[i:]
        else:
            merged[k:] = right[j:]
        return merged, count

    _, swaps = _merge_count(ys.copy())
    conc_minus_disc = n0 - n1 - n2 + n3 - 2 * swaps
    return conc_minus_disc, n0, n1, n2


def kendall_tau(x, y, variant: str = "a") -> float:
    """Kendall rank correlation; tau_a by default, tau_b with tie correction."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("samples must be 1-D of equal length")
    if x.size < 2:
        raise ValidationError("need at least 2 observations")
    cmd, n0, n1, n2 = _knight_counts(x, y)
    if variant == "a":
        return cmd / n0
    if variant == "b":
        denom = np.sqrt(float(n0 - n1) * float(n0 - n2))
        if denom == 0:
            raise ValidationError("tau_b undefined: a series is constant")
        return cmd / denom
    raise ValidationError("variant must be 'a' or 'b'")


def latent_rho(tau: float) -> float:
    """Gaussian-copula latent correlation rho = sin(pi tau / 2)."""
    if not -1.0 <= tau <= 1.0:
        raise ValidationError("tau must lie in [-1,1]")
    return float(np.sin(0.5 * np.pi * tau))


def log_returns(series: DailySeries) -> DailySeries:
    if np.any(series.values <= 0):
        raise ValidationError("log returns need positive levels")
    return DailySeries(series.dates[1:], np.diff(np.log(series.values)),
                       label=f"dlog({series.label})")


def differences(series: DailySeries) -> DailySeries:
    return DailySeries(series.dates[1:], np.diff(series.values),
                       label=f"diff({series.label})")


def inner_join(x: DailySeries, y: DailySeries):
    common = sorted(set(x.dates) & set(y.dates))
    if not common:
        raise DataError("series share no dates")
    xi = {d: v for d, v in zip(x.dates, x.values)}
    yi = {d: v for d, v in zip(y.dates, y.values)}
    return (common,
            np.array([xi[d] for d in common]),
            np.array([yi[d] for d in common]))


def rolling_directional_rho(x: DailySeries, y: DailySeries, window: int) -> RollingDependence:
    """Per-window Kendall tau mapped to rho, with one-sided long/short splits.

    Windows where either series is constant are skipped and counted.
    """
    dates, xs, ys = inner_join(x, y)
    if window > len(dates):
        raise ValidationError("window exceeds aligned series length")
    out_dates, rhos = [], []
    skipped = 0
    for end in range(window, len(dates) + 1):
        wx = xs[end - window:end]
        wy = ys[end - window:end]
        if np.ptp(wx) == 0 or np.ptp(wy) == 0:
            skipped += 1
            continue
        rhos.append(latent_rho(kendall_tau(wx, wy, variant="b")))
        out_dates.append(dates[end - 1])
    rho = np.array(rhos)
    return RollingDependence(out_dates, rho, np.maximum(rho, 0.0),
                             np.maximum(-rho, 0.0), skipped)


def realized_vol(values: np.ndarray, window: int) -> np.ndarray:
    """Rolling standard deviation over trailing windows (one per window end)."""
    v = np.asarray(values, dtype=float)
    if window > v.size:
        raise ValidationError("volatility window exceeds series length")
    return np.array([v[i - window:i].std(ddof=1) for i in range(window, v.size + 1)])


def stressed_target(rho_series, vol_series, vol_quantile: float,
                    tail_quantile: float, side: str = "short",
                    window: int = 0) -> DependenceTarget:
    """Tail quantile of the one-sided rho over the high-volatility regime."""
    rho = np.asarray(rho_series, dtype=float)
    vol = np.asarray(vol_series, dtype=float)
    if rho.shape != vol.shape:
        raise ValidationError("rho and volatility series must be aligned")
    if side not in ("long", "short"):
        raise ValidationError("side must be 'long' or 'short'")
    threshold = float(np.quantile(vol, vol_quantile))
    kept = rho[vol >= threshold]
    if kept.size == 0:
        raise DataError(f"stress regime empty: 0 of {rho.size} windows kept")
    target = empirical_var(kept, tail_quantile)
    return DependenceTarget(float(np.clip(target, 0.0, 1.0)),
                            regime=f"realized vol >= q{vol_quantile:g} ({kept.size}/{rho.size} windows)",
                            window=window, quantile=tail_quantile, side=side)


def copula_diagnostic_cva(cube: ExposureCube, surv: SurvivalCurve, rho: float,
                          n_draws: int, seed: int, recovery, notional: float,
                          scenario_id: str = "") -> CvaResult:
    """One-factor Gaussian-copula CVA diagnostic by exposure-rank matching.

    Paths are ranked by the scalar loss score Z_p; the copula couples the
    path rank with the inverse-transform default interval while leaving
    both marginals untouched.
    """
    if not -1.0 < rho < 1.0:
        raise ValidationError("rho must lie in (-1,1)")
    from .cva import _recovery_path  # shared grid/recovery handling
    rec = _recovery_path(recovery, cube.grid).recovery
    dp, _ = interval_default_probs(surv)
    cum = np.cumsum(dp)

    score = cube.positive_exposure[:, 1:] @ (cube.discount[1:] * dp)
    order = np.argsort(score, kind="stable")

    gen = np.random.Generator(np.random.Philox(key=(int(seed), 3)))
    g1 = gen.standard_normal(n_draws)
    g2 = gen.standard_normal(n_draws)
    u_m = norm.cdf(g1)
    u_d = norm.cdf(-rho * g1 - np.sqrt(1.0 - rho * rho) * g2)

    p_idx = order[np.minimum((u_m * cube.n_paths).astype(int), cube.n_paths - 1)]
    interval = np.searchsorted(cum, u_d, side="left")
    defaulted = interval < dp.size

    losses = np.zeros(n_draws)
    idx = np.where(defaulted)[0]
    t_idx = interval[idx] + 1
    losses[idx] = ((1.0 - rec[t_idx]) * cube.discount[t_idx]
                   * cube.positive_exposure[p_idx[idx], t_idx])
    return CvaResult(float(losses.mean()), float(notional),
                     float(losses.std(ddof=1) / np.sqrt(n_draws)), scenario_id)


def isotonic_fit(values: np.ndarray) -> np.ndarray:
    """Nondecreasing least-squares fit (pool adjacent violators)."""
    v = np.asarray(values, dtype=float).copy()
    w = np.ones_like(v)
    blocks = [[i] for i in range(v.size)]
    means = list(v)
    weights = list(w)
    i = 0
    while i < len(means) - 1:
        if means[i] > means[i + 1] + 1e-15:
            total = weights[i] + weights[i + 1]
            merged = (means[i] * weights[i] + means[i + 1] * weights[i + 1]) / total
            means[i:i + 2] = [merged]
            weights[i:i + 2] = [total]
            blocks[i:i + 2] = [blocks[i] + blocks[i + 1]]
            i = max(i - 1, 0)
        else:
            i += 1
    out = np.empty_like(v)
    for mean, block in zip(means, blocks):
        out[block] = mean
    return out


def build_equivalence_and_invert(cube: ExposureCube, surv_s: SurvivalCurve,
                                 surv_ref: SurvivalCurve, recovery, notional: float,
                                 eps_grid, rho_grid, rho_target: float,
                                 n_draws: int, seed: int):
    """Match KL add-ons to copula add-ons and pick the smallest adequate eps.

    Both add-on maps are built on the same exposure cube and seed (common
    random numbers). The rho -> add-on map is isotonically regularized
    before inversion; eps* is reported at grid resolution.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    rho_grid = np.asarray(rho_grid, dtype=float)
    if eps_grid.size == 0 or np.any(np.diff(eps_grid) <= 0) or np.any(eps_grid < 0):
        raise ValidationError("epsilon grid must be nonnegative increasing")
    if rho_grid.size == 0 or np.any(np.diff(rho_grid) <= 0):
        raise ValidationError("rho grid must be increasing")
    if rho_grid[0] != 0.0:
        rho_grid = np.concatenate(([0.0], rho_grid))

    losses_s = sample_losses(cube, surv_s, recovery, n_draws, seed, notional, "s")
    losses_ref = sample_losses(cube, surv_ref, recovery, n_draws, seed, notional, "ref")
    ecva_ind = float(losses_s.losses.mean() - losses_ref.losses.mean())

    addon_eps = np.empty(eps_grid.size)
    for i, e in enumerate(eps_grid):
        up_s = solve_kl_bound(losses_s, float(e))
        up_r = solve_kl_bound(losses_ref, float(e))
        addon_eps[i] = (up_s.bound - up_r.bound) - ecva_ind

    def ecva_rho(rho):
        c_s = copula_diagnostic_cva(cube, surv_s, rho, n_draws, seed, recovery, notional, "s")
        c_r = copula_diagnostic_cva(cube, surv_ref, rho, n_draws, seed, recovery, notional, "ref")
        return c_s.cva - c_r.cva

    base = ecva_rho(0.0)
    addon_rho = np.array([ecva_rho(float(r)) - base for r in rho_grid])
    addon_rho_iso = isotonic_fit(addon_rho)
    addon_rho_iso[0] = 0.0

    max_addon = addon_rho_iso[-1]
    rho_equiv = np.where(addon_eps <= max_addon,
                         np.interp(addon_eps, addon_rho_iso, rho_grid),
                         np.nan)
    rho_equiv = np.where(addon_eps <= 0.0, 0.0, rho_equiv)

    curve = EquivalenceCurve(rho_grid, addon_rho_iso, eps_grid, addon_eps, rho_equiv)
    if rho_target <= 0.0:
        return curve, 0.0
    attained = np.where(np.nan_to_num(rho_equiv, nan=-1.0) >= rho_target)[0]
    if attained.size == 0:
        best = np.nanmax(rho_equiv) if np.any(np.isfinite(rho_equiv)) else float("nan")
        raise NumericError(
            f"dependence budget unattainable: rho_target={rho_target:g}, "
            f"max attainable rho_equiv={best:g} at eps={eps_grid[-1]:g}")
    return curve, float(eps_grid[attained[0]])
