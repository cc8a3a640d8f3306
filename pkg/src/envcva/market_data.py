"""Flat-file market and scenario ingestion, and the discount curve.

All loaders are pure functions of file content. CSV conventions: UTF-8,
comma-separated, `.` decimal point, exact headers as documented per loader.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ValidationError


@dataclass(frozen=True)
class YieldQuoteSet:
    """Zero-yield quotes (tenor in years, continuously quoted decimal p.a.)."""

    as_of_date: dt.date | None
    tenors: np.ndarray
    yields: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tenors, dtype=float)
        y = np.asarray(self.yields, dtype=float)
        if t.size < 2:
            raise ValidationError("need at least 2 yield quotes")
        if np.any(t <= 0):
            raise ValidationError("tenors must be positive")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("tenors must be strictly increasing")
        if not np.all(np.isfinite(y)):
            raise ValidationError("yields must be finite")
        object.__setattr__(self, "tenors", t)
        object.__setattr__(self, "yields", y)


@dataclass(frozen=True)
class DiscountCurve:
    """Discount factors DF(0,t), log-linear between nodes.

    Between nodes log DF is linearly interpolated (piecewise-flat forwards);
    beyond the last node the last continuously compounded zero rate is held
    flat. DF(0)=1 always.
    """

    grid_tenors: np.ndarray
    log_dfs: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.grid_tenors, dtype=float)
        ld = np.asarray(self.log_dfs, dtype=float)
        if t.shape != ld.shape or t.ndim != 1:
            raise ValidationError("grid/log-DF shape mismatch")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValidationError("curve tenors must be positive, strictly increasing")
        object.__setattr__(self, "grid_tenors", t)
        object.__setattr__(self, "log_dfs", ld)

    def log_df(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValidationError("negative tenor")
        tg, ld = self.grid_tenors, self.log_dfs
        # flat extrapolation of the last zero rate beyond the final node
        last_zero = -ld[-1] / tg[-1]
        out = np.interp(t, np.concatenate(([0.0], tg)), np.concatenate(([0.0], ld)))
        beyond = t > tg[-1]
        if np.any(beyond):
            out = np.where(beyond, -last_zero * t, out)
        return out

    def df(self, t):
        return np.exp(self.log_df(t))

    def instantaneous_forward(self, t, h: float = 1e-4):
        """f(0,t) = -d/dt log DF by central differences (one-sided at t=0)."""
        t = np.asarray(t, dtype=float)
        lo = np.maximum(t - h, 0.0)
        hi = t + h
        return -(self.log_df(hi) - self.log_df(lo)) / (hi - lo)


@dataclass(frozen=True)
class DailySeries:
    """Dated daily observations; gaps are dropped at ingestion, never filled."""

    dates: list
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if len(self.dates) != v.size:
            raise ValidationError("dates/values length mismatch")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValidationError("dates must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values must be finite")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ScenarioDriverPanel:
    """Annual driver path for one (scenario, driver), median across models."""

    scenario_id: str
    driver_id: str
    years: np.ndarray
    values: np.ndarray
    aggregation: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.years, dtype=int)
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(y) <= 0):
            raise ValidationError("panel years must be strictly increasing")
        if np.any(v <= 0):
            raise ValidationError("driver values must be strictly positive")
        object.__setattr__(self, "years", y)
        object.__setattr__(self, "values", v)

    def value_at_year(self, year: int) -> float:
        idx = np.searchsorted(self.years, year)
        if idx >= self.years.size or self.years[idx] != year:
            raise DataError(f"year {year} not in panel for {self.scenario_id}/{self.driver_id}")
        return float(self.values[idx])


@dataclass(frozen=True)
class ProviderPathPanel:
    """One provider's yearly stress path, normalized so value(base_year)=1."""

    provider_label: str
    years: np.ndarray
    stress_values: np.ndarray
    base_year: int

    def __post_init__(self):
        y = np.asarray(self.years, dtype=int)
        v = np.asarray(self.stress_values, dtype=float)
        if np.any(v <= 0):
            raise ValidationError(f"provider {self.provider_label}: nonpositive value")
        i = np.searchsorted(y, self.base_year)
        if i >= y.size or y[i] != self.base_year:
            raise ValidationError(f"provider {self.provider_label}: base year {self.base_year} missing")
        if abs(v[i] - 1.0) > 1e-12:
            raise ValidationError(f"provider {self.provider_label}: not normalized at base year")
        object.__setattr__(self, "years", y)
        object.__setattr__(self, "stress_values", v)


def _read_rows(path, expected_header):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != expected_header:
                raise DataError(f"{path}: expected header {','.join(expected_header)}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(expected_header):
                    raise DataError(f"{path}:{lineno}: expected {len(expected_header)} fields")
                rows.append((lineno, [c.strip() for c in row]))
            return rows
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _parse_float(path, lineno, text, what):
    try:
        return float(text)
    except ValueError as exc:
        raise DataError(f"{path}:{lineno}: bad {what} {text!r}") from exc


def load_yield_quotes(path, as_of_date: dt.date | None = None) -> YieldQuoteSet:
    """Load `tenor_years,yield` CSV; sorted by tenor, duplicates rejected."""
    quotes = []
    for lineno, (tenor, yld) in _read_rows(path, ["tenor_years", "yield"]):
        quotes.append((_parse_float(path, lineno, tenor, "tenor"),
                       _parse_float(path, lineno, yld, "yield")))
    quotes.sort(key=lambda q: q[0])
    tenors = [q[0] for q in quotes]
    if len(set(tenors)) != len(tenors):
        raise DataError(f"{path}: duplicate tenor")
    try:
        return YieldQuoteSet(as_of_date, np.array(tenors),
                             np.array([q[1] for q in quotes]))
    except ValidationError as exc:
        raise DataError(f"{path}: {exc}") from exc


def build_discount_curve(quotes: YieldQuoteSet) -> DiscountCurve:
    """DF(t_k)=exp(-y_k t_k) at each quoted tenor, under continuous compounding."""
    return DiscountCurve(quotes.tenors, -quotes.yields * quotes.tenors)


def load_daily_series(path, label: str = "") -> DailySeries:
    """Load `date,value` CSV with ISO dates; rows with blank values dropped."""
    dates, values = [], []
    for lineno, (d, v) in _read_rows(path, ["date", "value"]):
        if not v:
            continue
        try:
            parsed = dt.date.fromisoformat(d)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad date {d!r}") from exc
        val = _parse_float(path, lineno, v, "value")
        if math.isnan(val):
            continue
        dates.append(parsed)
        values.append(val)
    order = np.argsort(np.array([d.toordinal() for d in dates])) if dates else []
    try:
        return DailySeries([dates[i] for i in order], np.array(values)[order],
                           label=label or str(path))
    except ValidationError as exc:
        raise DataError(f"{path}: {exc}") from exc


def load_scenario_drivers(path, scenario: str, driver: str, region: str) -> ScenarioDriverPanel:
    """Filter the long-format driver CSV and take the per-year median across models."""
    per_year: dict[int, list[float]] = {}
    models: dict[int, list[str]] = {}
    for lineno, (model, scen, reg, var, year, value) in _read_rows(
            path, ["model", "scenario", "region", "variable", "year", "value"]):
        if scen != scenario or reg != region or var != driver:
            continue
        y = int(_parse_float(path, lineno, year, "year"))
        v = _parse_float(path, lineno, value, "value")
        if v <= 0:
            raise DataError(f"{path}:{lineno}: nonpositive driver value {v}")
        per_year.setdefault(y, []).append(v)
        models.setdefault(y, []).append(model)
    if not per_year:
        raise DataError(f"{path}: no data for scenario={scenario!r} driver={driver!r} region={region!r}")
    years = sorted(per_year)
    values = [float(np.median(per_year[y])) for y in years]
    agg = {"method": "median", "models": sorted({m for ms in models.values() for m in ms})}
    return ScenarioDriverPanel(scenario, driver, np.array(years), np.array(values), agg)


def interpolate_to_grid(panel: ScenarioDriverPanel, grid_years) -> np.ndarray:
    """Linear interpolation between annual nodes; flat beyond the last node."""
    g = np.asarray(grid_years, dtype=float)
    if np.any(g < panel.years[0]):
        raise ValidationError(f"grid point before first panel year {panel.years[0]}")
    return np.interp(g, panel.years.astype(float), panel.values)


def load_provider_paths(path, base_year: int) -> list[ProviderPathPanel]:
    """Load `provider,year,value` CSV; each path divided by its base-year value."""
    raw: dict[str, list[tuple[int, float]]] = {}
    for lineno, (prov, year, value) in _read_rows(path, ["provider", "year", "value"]):
        y = int(_parse_float(path, lineno, year, "year"))
        v = _parse_float(path, lineno, value, "value")
        if v <= 0:
            raise DataError(f"{path}:{lineno}: nonpositive provider value {v}")
        raw.setdefault(prov, []).append((y, v))
    panels = []
    for prov in sorted(raw):
        pts = sorted(raw[prov])
        years = np.array([p[0] for p in pts])
        values = np.array([p[1] for p in pts])
        base = values[years == base_year]
        if base.size == 0:
            raise DataError(f"{path}: provider {prov!r} missing base year {base_year}")
        panels.append(ProviderPathPanel(prov, years, values / base[0], base_year))
    return panels
