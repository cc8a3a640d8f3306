"""End-to-end CLI tests via click's runner."""

import csv
import json
import os
import re

import pytest
from click.testing import CliRunner

from envcva.cli import main

FAST_MC = {"mc.exposure_paths": 400, "mc.loss_draws": 4000, "mc.seed": 42}


def invoke(args):
    return CliRunner().invoke(main, args)


def read_table(out_dir, name):
    with open(os.path.join(out_dir, f"{name}.csv"), newline="") as fh:
        return list(csv.DictReader(fh))


def run_json(out_dir):
    with open(os.path.join(out_dir, "run.json")) as fh:
        return json.load(fh)


@pytest.fixture()
def climate_cfg(config_factory, drivers_csv):
    return config_factory("climate.json", **FAST_MC,
                          **{"scenarios.drivers_csv": drivers_csv})


class TestClimate:
    def test_full_run(self, climate_cfg, tmp_path):
        out = str(tmp_path / "out")
        res = invoke(["climate", "--config", climate_cfg, "--out", out])
        assert res.exit_code == 0, res.output + str(res.exception)
        ecva = read_table(out, "ecva")
        assert {r["scenario"] for r in ecva} == {
            "Current Policies", "NDCs", "Net Zero 2050", "Delayed Transition"}
        ref = next(r for r in ecva if r["scenario"] == "Current Policies")
        assert float(ref["ecva_ind_bp"]) == 0.0
        mult = read_table(out, "multipliers")
        assert all(float(r["multiplier"]) == 1.0 for r in mult
                   if r["scenario"] == "Current Policies")
        for name in ("multipliers.svg", "ecva.svg", "run.json"):
            assert os.path.exists(os.path.join(out, name))
        art = run_json(out)
        assert art["command"] == "climate"
        assert art["results"]["lambda0"] > 0

    def test_stressed_scenarios_raise_hazard(self, climate_cfg, tmp_path):
        out = str(tmp_path / "out")
        assert invoke(["climate", "--config", climate_cfg, "--out", out]).exit_code == 0
        mult = read_table(out, "multipliers")
        last = {}
        for r in mult:
            last[r["scenario"]] = float(r["multiplier"])
        assert last["Delayed Transition"] > last["NDCs"] > 1.0

    def test_export_exposures(self, climate_cfg, tmp_path):
        out = str(tmp_path / "out")
        res = invoke(["climate", "--config", climate_cfg, "--out", out,
                      "--export-exposures"])
        assert res.exit_code == 0
        rows = read_table(out, "exposures")
        assert {"path", "time", "exposure"} <= set(rows[0])

    def test_determinism_across_runs(self, climate_cfg, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = str(tmp_path / name)
            assert invoke(["climate", "--config", climate_cfg, "--out", out]).exit_code == 0
            art = run_json(out)
            art.pop("timing", None)
            outs.append(json.dumps(art, sort_keys=True))
        assert outs[0] == outs[1]

    def test_seed_override_changes_results(self, climate_cfg, tmp_path):
        out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
        assert invoke(["climate", "--config", climate_cfg, "--out", out1]).exit_code == 0
        assert invoke(["climate", "--config", climate_cfg, "--out", out2,
                       "--seed", "99"]).exit_code == 0
        a = read_table(out1, "ecva")
        b = read_table(out2, "ecva")
        assert a[1]["cva_bp"] != b[1]["cva_bp"]


@pytest.fixture()
def nature_cfg(config_factory, indicator_csv, providers_csv):
    return config_factory(
        "nature.json", **FAST_MC,
        **{"nature.indicator_csv": indicator_csv,
           "nature.provider_csv": providers_csv,
           "nature.reference": "SSP1xRCP2.6",
           "nature.stressed": ["SSP3xRCP6.0", "SSP5xRCP8.5"]})


class TestNature:
    def test_hybrid_run(self, nature_cfg, tmp_path):
        out = str(tmp_path / "out")
        res = invoke(["nature", "--config", nature_cfg, "--out", out])
        assert res.exit_code == 0, res.output + str(res.exception)
        summary = read_table(out, "ncva_summary")
        assert {r["scenario"] for r in summary} == {"SSP3xRCP6.0", "SSP5xRCP8.5"}
        for r in summary:
            assert int(r["n"]) == 5
            assert float(r["es95"]) >= float(r["var95"])
            # one-sided tail factors can only amplify the policy stress
            assert float(r["median"]) >= float(r["policy_only_bp"]) - 1e-9
        quant = read_table(out, "wwr_quantiles")
        assert {float(r["quantile"]) for r in quant} == {0.50, 0.95, 0.99}
        assert os.path.exists(os.path.join(out, "ncva_summary.svg"))

    def test_policy_only_without_providers(self, config_factory, indicator_csv,
                                           tmp_path):
        cfg = config_factory("p.json", **FAST_MC,
                             **{"nature.indicator_csv": indicator_csv,
                                "nature.reference": "SSP1xRCP2.6",
                                "nature.stressed": ["SSP3xRCP6.0"]})
        out = str(tmp_path / "out")
        res = invoke(["nature", "--config", cfg, "--out", out])
        assert res.exit_code == 0, res.output + str(res.exception)
        summary = read_table(out, "ncva_summary")
        assert len(summary) == 1
        assert summary[0]["provider"] == "policy-only"
        # degraded habitat scenario raises hazard vs the reference
        assert float(summary[0]["policy_only_bp"]) > 0


@pytest.fixture()
def case_cfg(config_factory, catch_csv):
    return config_factory("case.json", **FAST_MC,
                          **{"case_study.catch_csv": catch_csv,
                             "translation.recovery_base": 0.40})


class TestCaseStudy:
    def test_run(self, case_cfg, tmp_path):
        out = str(tmp_path / "out")
        res = invoke(["case-study", "--config", case_cfg, "--out", out])
        assert res.exit_code == 0, res.output + str(res.exception)
        rows = {r["member"]: r for r in read_table(out, "case_study")}
        assert set(rows) == {"gfdl-esm4", "ipsl-cm6a-lr", "ref"}
        # declining catch -> positive NCVA; improving catch -> negative
        assert float(rows["gfdl-esm4"]["ncva_bp"]) > 0
        assert float(rows["ipsl-cm6a-lr"]["ncva_bp"]) < 0
        assert float(rows["ref"]["ncva_bp"]) == 0.0
        assert float(rows["gfdl-esm4"]["mean_multiplier"]) > 1.0


@pytest.fixture()
def commodity_cfg(config_factory, forwards_csv):
    return config_factory(
        "commodity.json", **FAST_MC,
        **{"commodity.forward_csv": forwards_csv,
           "commodity.sigma0": 0.35, "commodity.kappa": 0.8,
           "commodity.swap_maturity_years": 5.0,
           "commodity.market_shift": 0.85,
           "commodity.hazard_multiplier": 1.5,
           "commodity.two_factor": True,
           "credit.par_spread": 0.012})


class TestCommodity:
    def test_corners_and_sweep(self, commodity_cfg, tmp_path):
        out = str(tmp_path / "out")
        res = invoke(["commodity", "--config", commodity_cfg, "--out", out])
        assert res.exit_code == 0, res.output + str(res.exception)
        corners = read_table(out, "corners")
        assert [r["model"] for r in corners] == ["1f", "2f"]
        for r in corners:
            total = (float(r["credit"]) + float(r["market"])
                     + float(r["interaction"]))
            assert total == pytest.approx(float(r["total"]), abs=1e-9)
            assert float(r["credit"]) > 0       # higher hazard adds CVA
            assert float(r["market"]) < 0       # demand shock cuts exposure
        sweep = read_table(out, "eps_sweep")
        ups = [float(r["cva_upper"]) for r in sweep]
        assert ups == sorted(ups)
        assert os.path.exists(os.path.join(out, "corners.svg"))
        assert os.path.exists(os.path.join(out, "eps_sweep.svg"))

    def test_unit_market_shift_kills_market_term(self, config_factory,
                                                 forwards_csv, tmp_path):
        cfg = config_factory(
            "c1.json", **FAST_MC,
            **{"commodity.forward_csv": forwards_csv,
               "commodity.sigma0": 0.35, "commodity.kappa": 0.8,
               "commodity.market_shift": 1.0,
               "commodity.hazard_multiplier": 1.5})
        out = str(tmp_path / "out")
        assert invoke(["commodity", "--config", cfg, "--out", out]).exit_code == 0
        r = read_table(out, "corners")[0]
        assert float(r["market"]) == 0.0
        assert float(r["interaction"]) == 0.0


@pytest.fixture()
def calibrate_cfg(config_factory, drivers_csv, daily_csvs):
    proxy, spread = daily_csvs
    return config_factory(
        "cal.json",
        **{**FAST_MC,
           "scenarios.drivers_csv": drivers_csv,
           "market_data.proxy_csv": proxy,
           "market_data.spread_csv": spread,
           "mc.loss_draws": 8000,
           "epsilon.calibration": {"rolling_window": 60, "vol_window": 20,
                                   "vol_quantile": 0.90, "tail_quantile": 0.50,
                                   "scenario": "Delayed Transition",
                                   "eps_grid": [1e-3, 0.01, 0.05, 0.2],
                                   "rho_grid": [0.0, 0.15, 0.3, 0.6, 0.9]}})


class TestCalibrateEps:
    def test_run(self, calibrate_cfg, tmp_path):
        out = str(tmp_path / "out")
        res = invoke(["calibrate-eps", "--config", calibrate_cfg, "--out", out])
        assert res.exit_code == 0, res.output + str(res.exception)
        art = run_json(out)
        target = art["results"]["dependence_target"]
        assert 0.0 <= target["rho_target"] <= 1.0
        eps_star = art["results"]["eps_star"]
        cal = read_table(out, "calibration")
        eps_grid = [float(r["epsilon"]) for r in cal]
        assert eps_star == 0.0 or eps_star in eps_grid
        assert all(float(r["addon_eps"]) >= 0 for r in cal)
        rho_tab = read_table(out, "calibration_rho")
        assert float(rho_tab[0]["rho"]) == 0.0
        assert float(rho_tab[0]["addon_rho"]) == 0.0


class TestWwrSweep:
    def test_run(self, config_factory, drivers_csv, tmp_path):
        cfg = config_factory("w.json", **FAST_MC,
                             **{"scenarios.drivers_csv": drivers_csv})
        out = str(tmp_path / "out")
        res = invoke(["wwr-sweep", "--config", cfg, "--out", out])
        assert res.exit_code == 0, res.output + str(res.exception)
        sweep = read_table(out, "eps_sweep")
        ups = [float(r["cva_upper"]) for r in sweep]
        assert ups == sorted(ups)
        md = read_table(out, "marginal_distortion")
        assert sum(float(r["pmf_p"]) for r in md) == pytest.approx(1.0, abs=1e-9)
        assert sum(float(r["pmf_q"]) for r in md) == pytest.approx(1.0, abs=1e-9)


class TestErrorHandling:
    def test_missing_config_file(self, tmp_path):
        res = invoke(["climate", "--config", str(tmp_path / "nope.json"),
                      "--out", str(tmp_path / "o")])
        assert res.exit_code == 3
        err = json.loads(res.stderr)
        assert err["error"] == "DataError"

    def test_invalid_json_config(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        res = invoke(["climate", "--config", str(p), "--out", str(tmp_path / "o")])
        assert res.exit_code == 2

    def test_missing_required_key(self, tmp_path, yields_csv):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"grid": {"horizon_years": 10, "dt": 0.25},
                                 "mc": {"seed": 1}}))
        res = invoke(["climate", "--config", str(p), "--out", str(tmp_path / "o")])
        assert res.exit_code == 2
        assert "missing required key" in json.loads(res.stderr)["message"]

    def test_missing_seed_rejected(self, config_factory, drivers_csv, tmp_path):
        cfg_path = config_factory("noseed.json",
                                  **{"scenarios.drivers_csv": drivers_csv})
        cfg = json.load(open(cfg_path))
        del cfg["mc"]["seed"]
        p = tmp_path / "noseed2.json"
        p.write_text(json.dumps(cfg))
        res = invoke(["climate", "--config", str(p), "--out", str(tmp_path / "o")])
        assert res.exit_code == 2

    def test_bad_dt(self, config_factory, drivers_csv, tmp_path):
        cfg = config_factory("dt.json", **{"scenarios.drivers_csv": drivers_csv,
                                           "grid.dt": 0.3})
        res = invoke(["climate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert res.exit_code == 2

    def test_missing_driver_csv(self, config_factory, tmp_path):
        cfg = config_factory("nd.json", **FAST_MC,
                             **{"scenarios.drivers_csv": str(tmp_path / "x.csv")})
        res = invoke(["climate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert res.exit_code == 3

    def test_env_threads_validated(self, nature_cfg, tmp_path, monkeypatch):
        monkeypatch.setenv("ENVCVA_THREADS", "zero")
        res = invoke(["nature", "--config", nature_cfg, "--out",
                      str(tmp_path / "o")])
        assert res.exit_code == 2

    def test_env_threads_honored(self, nature_cfg, tmp_path, monkeypatch):
        monkeypatch.setenv("ENVCVA_THREADS", "1")
        res = invoke(["nature", "--config", nature_cfg, "--out",
                      str(tmp_path / "o")])
        assert res.exit_code == 0


class TestArtifact:
    def test_inputs_digested(self, climate_cfg, tmp_path):
        out = str(tmp_path / "out")
        assert invoke(["climate", "--config", climate_cfg, "--out", out]).exit_code == 0
        art = run_json(out)
        assert len(art["inputs"]) >= 2
        for digest in art["inputs"].values():
            assert re.fullmatch(r"[0-9a-f]{64}", digest)
        assert art["schema_version"] == 1
        assert art["config"]["mc"]["seed"] == 42
