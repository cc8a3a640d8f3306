import json

import numpy as np
import pytest

from envcva import (DiscountCurve, YieldQuoteSet, build_discount_curve)


@pytest.fixture(scope="session")
def treasury_curve() -> DiscountCurve:
    """A plausible positive-yield Treasury-style curve."""
    tenors = np.array([0.25, 0.5, 1, 2, 3, 5, 7, 10, 20, 30], dtype=float)
    yields = np.array([0.042, 0.0415, 0.040, 0.0395, 0.0392, 0.040,
                       0.0408, 0.0418, 0.0445, 0.0452])
    return build_discount_curve(YieldQuoteSet(None, tenors, yields))


@pytest.fixture(scope="session")
def flat_zero_curve() -> DiscountCurve:
    """DF identically 1 (zero yields)."""
    return build_discount_curve(
        YieldQuoteSet(None, np.array([1.0, 40.0]), np.array([0.0, 0.0])))


def write_csv(path, header, rows):
    lines = [header] + [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture()
def yields_csv(tmp_path):
    rows = [(0.25, 0.042), (1, 0.040), (2, 0.0395), (5, 0.040),
            (10, 0.0418), (20, 0.0445), (30, 0.0452)]
    return write_csv(tmp_path / "yields.csv", "tenor_years,yield", rows)


@pytest.fixture()
def drivers_csv(tmp_path):
    """Synthetic NGFS-style long CSV: GDP contracts and carbon price rises
    more under the stressed scenarios."""
    scenarios = {
        "Current Policies": (0.000, 1.00),
        "NDCs": (-0.002, 1.06),
        "Net Zero 2050": (-0.004, 1.14),
        "Delayed Transition": (-0.007, 1.22),
    }
    rows = []
    years = range(2025, 2056, 5)
    for model in ("ModelA", "ModelB", "ModelC"):
        bump = {"ModelA": 0.98, "ModelB": 1.0, "ModelC": 1.03}[model]
        for scen, (gdp_drag, cp_growth) in scenarios.items():
            for y in years:
                h = y - 2025
                gdp = 100.0 * bump * np.exp((0.02 + gdp_drag) * h)
                cp = 50.0 * bump * cp_growth ** h
                rows.append((model, scen, "World", "GDP|PPP", y, f"{gdp:.6f}"))
                rows.append((model, scen, "World", "Price|Carbon", y, f"{cp:.6f}"))
    return write_csv(tmp_path / "drivers.csv",
                     "model,scenario,region,variable,year,value", rows)


@pytest.fixture()
def indicator_csv(tmp_path):
    """Good-state intactness-style indicator declining under stress."""
    rows = []
    decline = {"SSP1xRCP2.6": 0.0005, "SSP3xRCP6.0": 0.004, "SSP5xRCP8.5": 0.003}
    for scen, rate in decline.items():
        for y in range(2025, 2056, 5):
            val = 0.75 * np.exp(-rate * (y - 2025))
            rows.append(("PREDICTS", scen, "Global", "intactness", y, f"{val:.8f}"))
    return write_csv(tmp_path / "indicator.csv",
                     "model,scenario,region,variable,year,value", rows)


@pytest.fixture()
def providers_csv(tmp_path):
    """Five synthetic tail-provider paths normalized at 2025."""
    rng = np.random.default_rng(11)
    rows = []
    for i in range(5):
        drift = rng.normal(0.0, 0.01)
        for y in range(2025, 2056):
            val = np.exp(drift * (y - 2025) + 0.02 * rng.normal() * (y > 2025))
            rows.append((f"seed{i:02d}", y, f"{max(val, 1e-3):.8f}"))
    return write_csv(tmp_path / "providers.csv", "provider,year,value", rows)


@pytest.fixture()
def catch_csv(tmp_path):
    rows = []
    for y in range(2025, 2055):
        frac = (y - 2025) / 29
        rows.append(("gfdl-esm4", y, f"{1.0 - 0.15 * frac:.6f}"))
        rows.append(("ipsl-cm6a-lr", y, f"{1.0 + 0.10 * frac:.6f}"))
    return write_csv(tmp_path / "catch.csv", "member,year,value", rows)


@pytest.fixture()
def forwards_csv(tmp_path):
    rows = [(t, f"{70.0 * np.exp(-0.02 * t) + 2.0:.4f}")
            for t in (0.25, 0.5, 1, 2, 3, 4, 5, 6)]
    return write_csv(tmp_path / "forwards.csv", "tenor_years,forward", rows)


@pytest.fixture()
def daily_csvs(tmp_path):
    """Correlated proxy/spread daily series with a high-vol stressed patch."""
    rng = np.random.default_rng(5)
    n = 500
    vol = np.where(np.arange(n) < 400, 0.01, 0.04)
    ret = vol * rng.standard_normal(n)
    # spread widens when the proxy falls, more strongly in the stress patch
    spread_chg = -np.where(vol > 0.02, 0.08, 0.02) * ret + 0.02 * rng.standard_normal(n)
    import datetime as dt
    dates = [dt.date(2024, 1, 1) + dt.timedelta(days=i) for i in range(n + 1)]
    px = 70.0 * np.exp(np.concatenate(([0.0], np.cumsum(ret))))
    cs = 3.5 + np.concatenate(([0.0], np.cumsum(spread_chg)))
    proxy = write_csv(tmp_path / "proxy.csv", "date,value",
                      [(d.isoformat(), f"{p:.6f}") for d, p in zip(dates, px)])
    spread = write_csv(tmp_path / "spread.csv", "date,value",
                       [(d.isoformat(), f"{c:.6f}") for d, c in zip(dates, cs)])
    return proxy, spread


def base_config(**overrides):
    cfg = {
        "as_of": "2025-12-22",
        "grid": {"horizon_years": 10.0, "dt": 0.25},
        "notional": 10_000_000.0,
        "swap": {"maturity_years": 10.0, "frequency": 4, "fixed_rate": None,
                 "payer_fixed": True},
        "hw1f": {"a": 0.5, "sigma": 0.01},
        "credit": {"par_spread": 0.008, "recovery": 0.4, "maturity_years": 5.0,
                   "premium_frequency": 4},
        "translation": {"betas": {"GDP|PPP": -0.6, "Price|Carbon": 0.15},
                        "base_year": 2025},
        "scenarios": {"reference": "Current Policies",
                      "stressed": ["NDCs", "Net Zero 2050", "Delayed Transition"],
                      "region": "World", "base_year": 2025},
        "epsilon": {"fixed": [0.003], "sweep": [0.01, 0.05, 0.10, 0.20]},
        "mc": {"exposure_paths": 2000, "loss_draws": 20000, "seed": 42},
    }
    for key, value in overrides.items():
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return cfg


@pytest.fixture()
def config_factory(tmp_path, yields_csv):
    def make(name="config.json", **overrides):
        cfg = base_config(**{"market_data.yields_csv": yields_csv, **overrides})
        path = tmp_path / name
        path.write_text(json.dumps(cfg, indent=2))
        return str(path)

    return make
