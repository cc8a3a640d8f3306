"""Exposure simulation: HW1F interest-rate swap and 1F/2F WTI commodity swap.

The short rate is decomposed as r_t = x_t + alpha(t) with x an
Ornstein-Uhlenbeck factor started at 0 and alpha the deterministic shift
that fits the initial discount curve. Both x and its time integral are
sampled with exact Gaussian transitions, so discounted bonds are
martingales without discretization bias. Commodity futures are driftless
lognormals with a Samuelson-damped short factor and an optional
long-lived second factor.

Scenario identity never enters exposure seeding: exposure paths are common
across scenarios by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .market_data import DiscountCurve

# step for finite-difference instantaneous forwards; shared by simulation
# and bond pricing so the forward term cancels exactly in P(t,T)
FD_STEP = 1e-4


@dataclass(frozen=True)
class HW1FParams:
    a: float
    sigma: float

    def __post_init__(self):
        if self.a <= 0 or self.sigma < 0:
            raise ValidationError("require a > 0 and sigma >= 0")


@dataclass(frozen=True)
class SwapSpec:
    """Fixed-for-floating IRS: payment times, accruals, fixed rate, notional."""

    notional: float
    fixed_rate: float
    payment_times: np.ndarray
    accruals: np.ndarray
    payer_fixed: bool = True

    def __post_init__(self):
        t = np.asarray(self.payment_times, dtype=float)
        acc = np.asarray(self.accruals, dtype=float)
        if t.size == 0 or np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise ValidationError("payment times must be positive increasing")
        if acc.shape != t.shape or np.any(acc <= 0):
            raise ValidationError("accruals must be positive, one per payment")
        object.__setattr__(self, "payment_times", t)
        object.__setattr__(self, "accruals", acc)


@dataclass(frozen=True)
class ExposureCube:
    """paths x grid matrix of positive exposures with shared discounting."""

    grid: np.ndarray
    positive_exposure: np.ndarray
    discount: np.ndarray
    seed: int

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        e = np.asarray(self.positive_exposure, dtype=float)
        d = np.asarray(self.discount, dtype=float)
        if e.ndim != 2 or e.shape[1] != g.size or d.shape != g.shape:
            raise ValidationError("cube shape mismatch")
        if np.any(e < 0):
            raise ValidationError("exposures must be nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "positive_exposure", e)
        object.__setattr__(self, "discount", d)

    @property
    def n_paths(self) -> int:
        return self.positive_exposure.shape[0]


@dataclass(frozen=True)
class CommodityCurveState:
    tenors: np.ndarray
    forwards: np.ndarray
    label: str = "M0"

    def __post_init__(self):
        t = np.asarray(self.tenors, dtype=float)
        f = np.asarray(self.forwards, dtype=float)
        if np.any(f <= 0):
            raise ValidationError("forwards must be positive")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("tenors must be strictly increasing")
        object.__setattr__(self, "tenors", t)
        object.__setattr__(self, "forwards", f)

    def forward(self, T):
        T = np.asarray(T, dtype=float)
        if np.any(T > self.tenors[-1] + 1e-9):
            raise ValidationError("tenor beyond initial forward curve")
        # flat below the first quoted tenor (np.interp clamps there)
        return np.exp(np.interp(T, self.tenors, np.log(self.forwards)))


def uniform_grid(horizon: float, dt: float) -> np.ndarray:
    n = int(round(horizon / dt))
    if abs(n * dt - horizon) > 1e-9:
        raise ValidationError("horizon must be a multiple of dt")
    return np.arange(n + 1) * dt


def _check_uniform(grid) -> float:
    grid = np.asarray(grid, dtype=float)
    dts = np.diff(grid)
    if dts.size == 0 or not np.allclose(dts, dts[0], rtol=0, atol=1e-9):
        raise ValidationError("time grid must be uniform")
    return float(dts[0])


def _normals(seed: int, stream: int, shape) -> np.ndarray:
    """Counter-based normals: Philox keyed by (seed, stream), fixed draw order."""
    gen = np.random.Generator(np.random.Philox(key=(int(seed), int(stream))))
    return gen.standard_normal(shape)


@dataclass(frozen=True)
class ShortRatePathSet:
    """HW1F paths: factor x, short rate r and exact integrated short rate."""

    grid: np.ndarray
    x: np.ndarray
    rates: np.ndarray
    integrated_rates: np.ndarray
    params: HW1FParams
    curve: DiscountCurve
    seed: int


def _hw_shift(params: HW1FParams, curve: DiscountCurve, t):
    """alpha(t) = f(0,t) + sigma^2/(2a^2) (1-e^{-at})^2."""
    a, s = params.a, params.sigma
    return curve.instantaneous_forward(t, h=FD_STEP) + (s * s) / (2 * a * a) * (1 - np.exp(-a * np.asarray(t, float))) ** 2


def _integrated_shift(params: HW1FParams, curve: DiscountCurve, t):
    """int_0^t alpha(s) ds in closed form (no forward-rate differentiation)."""
    a, s = params.a, params.sigma
    t = np.asarray(t, dtype=float)
    var_kernel = t - 2 * (1 - np.exp(-a * t)) / a + (1 - np.exp(-2 * a * t)) / (2 * a)
    return -curve.log_df(t) + (s * s) / (2 * a * a) * var_kernel


def simulate_hw1f_paths(params: HW1FParams, curve: DiscountCurve, grid,
                        n_paths: int, seed: int) -> ShortRatePathSet:
    """Exact-transition OU sampling of (x_t, int x dt); deterministic in seed."""
    grid = np.asarray(grid, dtype=float)
    dt = _check_uniform(grid)
    if n_paths < 2:
        raise ValidationError("need at least 2 paths")
    a, s = params.a, params.sigma
    n_steps = grid.size - 1
    e = np.exp(-a * dt)
    vx = s * s * (1 - e * e) / (2 * a)
    vy = s * s / (a * a) * (dt - 2 * (1 - e) / a + (1 - e * e) / (2 * a))
    cxy = s * s / (2 * a * a) * (1 - e) ** 2

    z = _normals(seed, 0, (2, n_steps, n_paths))
    x = np.zeros((n_paths, grid.size))
    y = np.zeros((n_paths, grid.size))
    if vx > 0:
        sd_x = np.sqrt(vx)
        b = cxy / vx
        sd_res = np.sqrt(max(vy - cxy * cxy / vx, 0.0))
    else:
        sd_x = b = sd_res = 0.0
    for k in range(n_steps):
        dx = sd_x * z[0, k]
        dy_given = b * dx + sd_res * z[1, k]
        y[:, k + 1] = y[:, k] + x[:, k] * (1 - e) / a + dy_given
        x[:, k + 1] = x[:, k] * e + dx

    alpha = _hw_shift(params, curve, grid)
    int_alpha = _integrated_shift(params, curve, grid)
    return ShortRatePathSet(grid, x, x + alpha[None, :], y + int_alpha[None, :],
                            params, curve, int(seed))


def zcb_price(params: HW1FParams, curve: DiscountCurve, r, t: float, T):
    """Affine HW1F bond price P(t,T) = A(t,T) exp(-B(t,T) r).

    r and T broadcast against each other; result has the broadcast shape.
    """
    if np.any(np.asarray(T) < t):
        raise ValidationError("maturity before valuation time")
    a, s = params.a, params.sigma
    r = np.asarray(r, dtype=float)
    T = np.asarray(T, dtype=float)
    B = (1 - np.exp(-a * (T - t))) / a
    f0t = curve.instantaneous_forward(t, h=FD_STEP)
    log_A = (curve.log_df(T) - curve.log_df(t)
             + B * f0t
             - (s * s) / (4 * a) * (1 - np.exp(-2 * a * t)) * B * B)
    out = np.exp(log_A - B * r)
    return float(out) if out.ndim == 0 else out


def _zcb_matrix(params: HW1FParams, curve: DiscountCurve, r: np.ndarray, t: float,
                maturities: np.ndarray) -> np.ndarray:
    """P(t,T_k) for a vector of path rates r and maturities; shape (paths, k)."""
    a, s = params.a, params.sigma
    B = (1 - np.exp(-a * (maturities - t))) / a
    f0t = curve.instantaneous_forward(t, h=FD_STEP)
    log_A = (curve.log_df(maturities) - curve.log_df(t)
             + B * f0t
             - (s * s) / (4 * a) * (1 - np.exp(-2 * a * t)) * B * B)
    return np.exp(log_A[None, :] - r[:, None] * B[None, :])


def initial_short_rate(curve: DiscountCurve) -> float:
    """r(0) = f(0,0), consistent with the bond-formula forward convention."""
    return float(curve.instantaneous_forward(0.0, h=FD_STEP))


def par_rate(curve: DiscountCurve, payment_times, accruals) -> float:
    """Fixed rate making the spot-starting swap worth zero at t=0."""
    t = np.asarray(payment_times, dtype=float)
    acc = np.asarray(accruals, dtype=float)
    dfs = curve.df(t)
    return float((1.0 - dfs[-1]) / np.sum(acc * dfs))


def make_swap_spec(notional: float, maturity: float, frequency: int,
                   curve: DiscountCurve, fixed_rate: float | None = None,
                   payer_fixed: bool = True) -> SwapSpec:
    """Spot-starting swap with equal accruals; at-market fixed rate by default."""
    n = int(round(maturity * frequency))
    times = np.arange(1, n + 1) / frequency
    accruals = np.full(n, 1.0 / frequency)
    if fixed_rate is None:
        fixed_rate = par_rate(curve, times, accruals)
    return SwapSpec(notional, float(fixed_rate), times, accruals, payer_fixed)


def swap_value(r, t: float, spec: SwapSpec, params: HW1FParams,
               curve: DiscountCurve):
    """Mark-to-market of the swap at time t given short rate(s) r.

    Payer-fixed: N(1 - P(t,T_m)) - N K sum_{T_k>t} alpha_k P(t,T_k).
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    live = spec.payment_times > t + 1e-12
    if not np.any(live):
        out = np.zeros(r.shape)
        return out if out.size > 1 else float(out[0])
    times = spec.payment_times[live]
    acc = spec.accruals[live]
    P = _zcb_matrix(params, curve, r, t, times)
    value = spec.notional * ((1.0 - P[:, -1]) - spec.fixed_rate * P @ acc)
    if not spec.payer_fixed:
        value = -value
    return value if value.size > 1 else float(value[0])


def compute_exposure_cube(paths: ShortRatePathSet, spec: SwapSpec,
                          params: HW1FParams, curve: DiscountCurve) -> ExposureCube:
    """E+_p(t_i) = max(V_p(t_i), 0) across the path set."""
    grid = paths.grid
    epos = np.empty((paths.rates.shape[0], grid.size))
    for i, t in enumerate(grid):
        v = swap_value(paths.rates[:, i], float(t), spec, params, curve)
        epos[:, i] = np.maximum(np.atleast_1d(v), 0.0)
    return ExposureCube(grid, epos, curve.df(grid), paths.seed)


def epe_profile(cube: ExposureCube) -> np.ndarray:
    """Expected positive exposure: arithmetic path average per grid point."""
    if cube.n_paths == 0:
        raise ValidationError("empty exposure cube")
    return cube.positive_exposure.mean(axis=0)


# ---------------------------------------------------------------------------
# Commodity (WTI) exposure models


@dataclass(frozen=True)
class CommodityParams:
    """Samuelson 1F short factor plus optional long-lived 2F factor."""

    sigma0: float
    kappa: float
    sigma2: float = 0.0
    rho_factors: float = 0.0

    def __post_init__(self):
        if self.sigma0 < 0 or self.sigma2 < 0 or self.kappa <= 0:
            raise ValidationError("require sigma >= 0 and kappa > 0")
        if not -1.0 < self.rho_factors < 1.0:
            raise ValidationError("factor correlation must lie in (-1,1)")


@dataclass(frozen=True)
class CommoditySwapSpec:
    """Fixed-for-floating commodity swap, unit volume per settlement."""

    payment_times: np.ndarray
    fixed_price: float
    volume: float = 1.0
    payer_fixed: bool = True

    def __post_init__(self):
        t = np.asarray(self.payment_times, dtype=float)
        if np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise ValidationError("payment times must be positive increasing")
        object.__setattr__(self, "payment_times", t)


@dataclass(frozen=True)
class FuturesPathSet:
    """State paths for the lognormal futures models; F(t,T) computed on demand.

    ln F(t,T) = ln F(0,T) - V(t,T)/2 + sigma0 e^{-kappa T} X_t + sigma2 W2_t,
    with X_t = int_0^t e^{kappa s} dW1(s), so futures are driftless per fixed T.
    """

    grid: np.ndarray
    X: np.ndarray
    W2: np.ndarray
    params: CommodityParams
    initial_curve: CommodityCurveState
    seed: int

    def futures(self, t_index: int, T) -> np.ndarray:
        p = self.params
        t = float(self.grid[t_index])
        T = np.atleast_1d(np.asarray(T, dtype=float))
        f0 = self.initial_curve.forward(T)
        k = p.kappa
        load1 = p.sigma0 * np.exp(-k * T)
        var = (load1 ** 2 * (np.expm1(2 * k * t)) / (2 * k)
               + p.sigma2 ** 2 * t
               + 2 * p.rho_factors * load1 * p.sigma2 * np.expm1(k * t) / k)
        shock = (self.X[:, t_index, None] * load1[None, :]
                 + self.W2[:, t_index, None] * p.sigma2)
        return f0[None, :] * np.exp(shock - 0.5 * var[None, :])


def simulate_wti_futures(model: str, params: CommodityParams,
                         initial_curve: CommodityCurveState, grid,
                         n_paths: int, seed: int) -> FuturesPathSet:
    """Exact Gaussian sampling of the factor states (X_t, W2_t)."""
    if model not in ("1f", "2f"):
        raise ValidationError("model must be '1f' or '2f'")
    grid = np.asarray(grid, dtype=float)
    dt = _check_uniform(grid)
    p = params if model == "2f" else CommodityParams(params.sigma0, params.kappa, 0.0, 0.0)
    k = p.kappa
    n_steps = grid.size - 1

    z1 = _normals(seed, 1, (n_steps, n_paths))
    z2 = _normals(seed, 2, (n_steps, n_paths))
    X = np.zeros((n_paths, grid.size))
    W2 = np.zeros((n_paths, grid.size))
    for j in range(n_steps):
        t0, t1 = grid[j], grid[j + 1]
        v_x = (np.exp(2 * k * t1) - np.exp(2 * k * t0)) / (2 * k)
        c = p.rho_factors * (np.exp(k * t1) - np.exp(k * t0)) / k
        sd_x = np.sqrt(v_x)
        # dW2 increment correlated with the X increment via rho_factors
        b = c / v_x
        sd_res = np.sqrt(max(dt - c * c / v_x, 0.0))
        dx = sd_x * z1[j]
        X[:, j + 1] = X[:, j] + dx
        W2[:, j + 1] = W2[:, j] + b * dx + sd_res * z2[j]
    return FuturesPathSet(grid, X, W2, p, initial_curve, int(seed))


def shift_forward_curve(curve: CommodityCurveState, factor: float) -> CommodityCurveState:
    """Level shift of the initial forward curve (stress state M1)."""
    if factor <= 0:
        raise ValidationError("shift factor must be positive")
    return CommodityCurveState(curve.tenors, curve.forwards * factor, label="M1")


def make_commodity_swap(initial_curve: CommodityCurveState, maturity: float,
                        settlements_per_year: int = 12, fixed_price: float | None = None,
                        volume: float = 1.0, payer_fixed: bool = True) -> CommoditySwapSpec:
    """Monthly-settled swap; fixed price defaults to the initial curve average."""
    n = int(round(maturity * settlements_per_year))
    times = np.arange(1, n + 1) / settlements_per_year
    if fixed_price is None:
        fixed_price = float(np.mean(initial_curve.forward(times)))
    return CommoditySwapSpec(times, float(fixed_price), volume, payer_fixed)


def commodity_swap_exposure(paths: FuturesPathSet, swap: CommoditySwapSpec,
                            discount: DiscountCurve) -> ExposureCube:
    """Positive part of the discounted remaining settlement values per path."""
    grid = paths.grid
    if swap.payment_times[-1] > paths.initial_curve.tenors[-1] + 1e-9:
        raise ValidationError("swap tenors extend beyond simulated curve")
    df_pay = discount.df(swap.payment_times)
    df_grid = discount.df(grid)
    n_paths = paths.X.shape[0]
    epos = np.empty((n_paths, grid.size))
    for i, t in enumerate(grid):
        live = swap.payment_times > t + 1e-12
        if not np.any(live):
            epos[:, i] = 0.0
            continue
        F = paths.futures(i, swap.payment_times[live])
        fwd_df = df_pay[live] / df_grid[i]
        value = swap.volume * (F - swap.fixed_price) @ fwd_df
        if not swap.payer_fixed:
            value = -value
        epos[:, i] = np.maximum(value, 0.0)
    return ExposureCube(grid, epos, df_grid, paths.seed)
