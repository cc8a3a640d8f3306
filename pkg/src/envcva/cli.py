"""End-to-end orchestration: one JSON config, one run, one artifact.

Subcommands: climate, nature, case-study, commodity, calibrate-eps,
wwr-sweep. Each writes `run.json` plus the CSV tables and SVG figures it
owns into the output directory. Exit codes: 0 success, 2 validation,
3 data, 4 numeric; errors emit machine-readable JSON on stderr.
"""
from __future__ import annotations

import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from . import __version__
from .calibration import (build_equivalence_and_invert, copula_diagnostic_cva,
                          differences, inner_join, log_returns, realized_vol,
                          rolling_directional_rho, stressed_target)
from .credit_curves import (RecoveryPath, apply_multiplier, calibrate_flat_hazard,
                            flat_hazard_curve, survival_curve)
from .cva import (distribution_summary, independence_cva, sample_losses)
from .errors import DataError, EnvCvaError, ValidationError
from .exposure import (CommodityCurveState, CommodityParams, HW1FParams,
                       commodity_swap_exposure, compute_exposure_cube,
                       epe_profile, make_commodity_swap, make_swap_spec,
                       shift_forward_curve, simulate_hw1f_paths,
                       simulate_wti_futures, uniform_grid)
from .market_data import (DiscountCurve, build_discount_curve, load_daily_series,
                          load_provider_paths, load_scenario_drivers,
                          load_yield_quotes, interpolate_to_grid)
from .market_data import _read_rows, _parse_float
from .reporting import (ArtifactBuilder, bar_figure, hist_figure, line_figure,
                        write_table)
from .robust import delta_wwr, eps_sweep, marginal_distortion, solve_kl_bound
from .translation import (TranslationConfig, annual_to_grid, climate_multiplier,
                          hybrid_multiplier, reference_multiplier, tail_factors,
                          two_stage_transmission)

_REQUIRED = object()
BP = 1e4


def worker_count() -> int:
    env = os.environ.get("ENVCVA_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValidationError(f"ENVCVA_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ValidationError("ENVCVA_THREADS must be >= 1")
        return n
    return min(os.cpu_count() or 1, 8)


def cfg_get(cfg: dict, path: str, default=_REQUIRED):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is _REQUIRED:
                raise ValidationError(f"config is missing required key {path!r}")
            return default
        node = node[part]
    return node


def load_config(path, seed_override=None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if seed_override is not None:
        cfg.setdefault("mc", {})["seed"] = int(seed_override)
    # master seed is mandatory: no entropy-source defaults
    cfg_get(cfg, "mc.seed")
    dt = cfg_get(cfg, "grid.dt")
    horizon = cfg_get(cfg, "grid.horizon_years")
    if dt <= 0:
        raise ValidationError("grid.dt must be positive")
    if abs(round(horizon / dt) * dt - horizon) > 1e-9:
        raise ValidationError("grid.horizon_years must be a multiple of grid.dt")
    return cfg


def translation_config(cfg: dict) -> TranslationConfig:
    t = cfg.get("translation", {})
    kwargs = {}
    for key in ("betas", "base_year", "policy_beta", "omega", "alpha_catch",
                "alpha_price", "cost_share", "beta_pd", "k_recovery",
                "recovery_base", "tail_mode"):
        if key in t:
            kwargs[key] = t[key]
    for key in ("policy_clip", "hazard_clip", "recovery_bounds"):
        if key in t:
            kwargs[key] = tuple(t[key])
    return TranslationConfig(**kwargs)


def build_market(cfg: dict, artifact: ArtifactBuilder):
    yields_csv = cfg_get(cfg, "market_data.yields_csv")
    artifact.add_input(yields_csv)
    curve = build_discount_curve(load_yield_quotes(yields_csv))
    grid = uniform_grid(float(cfg_get(cfg, "grid.horizon_years")),
                        float(cfg_get(cfg, "grid.dt")))
    lam0 = calibrate_flat_hazard(
        float(cfg_get(cfg, "credit.par_spread")),
        float(cfg_get(cfg, "credit.recovery")),
        float(cfg_get(cfg, "credit.maturity_years", 5.0)),
        int(cfg_get(cfg, "credit.premium_frequency", 4)),
        curve)
    return curve, grid, lam0


def build_exposure(cfg: dict, curve: DiscountCurve, grid) :
    params = HW1FParams(float(cfg_get(cfg, "hw1f.a")), float(cfg_get(cfg, "hw1f.sigma")))
    seed = int(cfg_get(cfg, "mc.seed"))
    n_paths = int(cfg_get(cfg, "mc.exposure_paths", 5000))
    paths = simulate_hw1f_paths(params, curve, grid, n_paths, seed)
    spec = make_swap_spec(
        float(cfg_get(cfg, "notional")),
        float(cfg_get(cfg, "swap.maturity_years", cfg_get(cfg, "grid.horizon_years"))),
        int(cfg_get(cfg, "swap.frequency", 4)),
        curve,
        cfg_get(cfg, "swap.fixed_rate", None),
        bool(cfg_get(cfg, "swap.payer_fixed", True)))
    return compute_exposure_cube(paths, spec, params, curve)


def climate_multipliers(cfg: dict, grid, artifact: ArtifactBuilder):
    """Per-scenario reference-relative multiplier paths from the driver CSV."""
    tcfg = translation_config(cfg)
    drivers_csv = cfg_get(cfg, "scenarios.drivers_csv")
    artifact.add_input(drivers_csv)
    region = cfg_get(cfg, "scenarios.region", "World")
    reference = cfg_get(cfg, "scenarios.reference")
    stressed = list(cfg_get(cfg, "scenarios.stressed"))
    base_year = int(cfg_get(cfg, "scenarios.base_year", tcfg.base_year))
    grid_years = base_year + np.asarray(grid, dtype=float)

    def driver_values(scenario):
        vals, bases = {}, {}
        for driver in tcfg.betas:
            panel = load_scenario_drivers(drivers_csv, scenario, driver, region)
            vals[driver] = interpolate_to_grid(panel, grid_years)
            bases[driver] = float(interpolate_to_grid(panel, [base_year])[0])
        return vals, bases

    ref_vals, ref_bases = driver_values(reference)
    out = {reference: reference_multiplier(grid, reference)}
    for scenario in stressed:
        s_vals, s_bases = driver_values(scenario)
        out[scenario] = climate_multiplier(grid, s_vals, ref_vals, s_bases,
                                           ref_bases, tcfg, scenario)
    return out, reference


def scenario_credit(cube, grid, lam0, multiplier, recovery, notional, seed, n_draws):
    hazard = apply_multiplier(flat_hazard_curve(grid, lam0), multiplier)
    surv = survival_curve(hazard)
    res = independence_cva(cube, surv, recovery, notional, multiplier.scenario_id)
    losses = sample_losses(cube, surv, recovery, n_draws, seed, notional,
                           multiplier.scenario_id)
    return surv, res, losses


def emit_multiplier_table(out_dir, multipliers: dict, recoveries: dict | None = None):
    rows = []
    header = ["scenario", "time", "multiplier"] + (["recovery"] if recoveries else [])
    for sid, m in multipliers.items():
        for i, t in enumerate(m.grid):
            row = [sid, float(t), float(m.values[i])]
            if recoveries:
                row.append(float(recoveries[sid].recovery[i]))
            rows.append(row)
    write_table(out_dir, "multipliers", header, rows)
    first = next(iter(multipliers.values()))
    line_figure(out_dir, "multipliers", first.grid,
                {sid: m.values for sid, m in multipliers.items()},
                "time (years)", "hazard multiplier")


def _error_exit(exc: EnvCvaError):
    json.dump({"error": type(exc).__name__, "message": str(exc),
               "exit_code": exc.exit_code}, sys.stderr)
    sys.stderr.write("\n")
    sys.exit(exc.exit_code)


def _run(command, config_path, out_dir, seed, fn, **kwargs):
    try:
        cfg = load_config(config_path, seed)
        os.makedirs(out_dir, exist_ok=True)
        artifact = ArtifactBuilder(command, cfg, __version__)
        artifact.add_input(config_path)
        fn(cfg, out_dir, artifact, **kwargs)
        path = artifact.write(out_dir)
        click.echo(f"wrote {path}")
    except EnvCvaError as exc:
        _error_exit(exc)


@click.group()
@click.version_option(__version__)
def main():
    """Environmental CVA engine."""


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=False), help="Run config (JSON).")(fn)
    fn = click.option("--out", "out_dir", required=True,
                      type=click.Path(file_okay=False), help="Output directory.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Master seed override.")(fn)
    return fn


# ---------------------------------------------------------------------------


def run_climate(cfg, out_dir, artifact, export_exposures=False):
    curve, grid, lam0 = build_market(cfg, artifact)
    notional = float(cfg_get(cfg, "notional"))
    recovery = float(cfg_get(cfg, "credit.recovery"))
    seed = int(cfg_get(cfg, "mc.seed"))
    n_draws = int(cfg_get(cfg, "mc.loss_draws", 50000))
    epsilon = float(cfg_get(cfg, "epsilon.fixed", [0.003])[0])

    multipliers, reference = climate_multipliers(cfg, grid, artifact)
    cube = build_exposure(cfg, curve, grid)
    if export_exposures:
        export_exposure_cube(out_dir, cube)
    emit_multiplier_table(out_dir, multipliers)

    per_scenario = {}
    for sid, m in multipliers.items():
        per_scenario[sid] = scenario_credit(cube, grid, lam0, m, recovery,
                                            notional, seed, n_draws)
    _, ref_res, ref_losses = per_scenario[reference]
    ref_bound = solve_kl_bound(ref_losses, epsilon)

    rows, results = [], {}
    for sid, (_, res, losses) in per_scenario.items():
        bound = solve_kl_bound(losses, epsilon)
        ecva_up, wwr = delta_wwr(bound, ref_bound, res, ref_res)
        ecva_ind = res.cva - ref_res.cva
        rows.append((sid, res.cva_bp, BP * ecva_ind / notional,
                     BP * ecva_up / notional, BP * wwr / notional, epsilon))
        results[sid] = {"cva_bp": res.cva_bp, "ecva_ind_bp": BP * ecva_ind / notional,
                        "ecva_upper_bp": BP * ecva_up / notional,
                        "wwr_bp": BP * wwr / notional,
                        "multiplier_at_horizon": float(multipliers[sid].values[-1])}
    write_table(out_dir, "ecva",
                ["scenario", "cva_bp", "ecva_ind_bp", "ecva_upper_bp", "wwr_bp", "epsilon"],
                rows)
    stressed = [r for r in rows if r[0] != reference]
    bar_figure(out_dir, "ecva", [r[0] for r in stressed],
               {"ECVA independence (bp)": [r[2] for r in stressed],
                "Delta WWR (bp)": [r[4] for r in stressed]},
               "bp of notional", "Headline decomposition")
    artifact.add_result("lambda0", lam0)
    artifact.add_result("epsilon", epsilon)
    artifact.add_result("reference", reference)
    artifact.add_result("scenarios", results)


def export_exposure_cube(out_dir, cube):
    path = os.path.join(out_dir, "exposures.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "time", "exposure"])
        for p in range(cube.n_paths):
            for i, t in enumerate(cube.grid):
                writer.writerow([p, f"{t:.10g}", f"{cube.positive_exposure[p, i]:.10g}"])


@main.command("climate")
@_common_options
@click.option("--export-exposures", is_flag=True, help="Also dump the exposure cube (large).")
def cmd_climate(config_path, out_dir, seed, export_exposures):
    """Climate CVA: NGFS multipliers, ECVA per scenario, robust WWR."""
    _run("climate", config_path, out_dir, seed, run_climate,
         export_exposures=export_exposures)


# ---------------------------------------------------------------------------


def nature_policy_paths(cfg, grid, artifact):
    """Annual-stepped policy stress paths per scenario from the indicator CSV."""
    tcfg = translation_config(cfg)
    csv_path = cfg_get(cfg, "nature.indicator_csv")
    artifact.add_input(csv_path)
    variable = cfg_get(cfg, "nature.variable", "intactness")
    region = cfg_get(cfg, "nature.region", "Global")
    reference = cfg_get(cfg, "nature.reference")
    stressed = list(cfg_get(cfg, "nature.stressed"))
    base_year = int(cfg_get(cfg, "nature.base_year", tcfg.base_year))

    def stress_path(scenario):
        panel = load_scenario_drivers(csv_path, scenario, variable, region)
        years = np.arange(panel.years[0], panel.years[-1] + 1)
        annual = interpolate_to_grid(panel, years)
        base = float(interpolate_to_grid(panel, [base_year])[0])
        return annual_to_grid(years, base / annual, grid, base_year)

    stress = {s: stress_path(s) for s in [reference] + stressed}
    return stress, reference, stressed, tcfg, base_year


def run_nature(cfg, out_dir, artifact):
    curve, grid, lam0 = build_market(cfg, artifact)
    notional = float(cfg_get(cfg, "notional"))
    recovery = float(cfg_get(cfg, "credit.recovery"))
    seed = int(cfg_get(cfg, "mc.seed"))
    n_draws = int(cfg_get(cfg, "mc.loss_draws", 50000))
    epsilon = float(cfg_get(cfg, "epsilon.fixed", [0.003])[0])
    stress, reference, stressed, tcfg, base_year = nature_policy_paths(cfg, grid, artifact)
    cube = build_exposure(cfg, curve, grid)

    lo, hi = tcfg.policy_clip
    multipliers = {reference: reference_multiplier(grid, reference)}
    for sid in stressed:
        from .translation import MultiplierPath
        values = np.clip((stress[sid] / stress[reference]) ** tcfg.policy_beta, lo, hi)
        multipliers[sid] = MultiplierPath(grid, values, sid, clip_bounds=tcfg.policy_clip)
    emit_multiplier_table(out_dir, multipliers)

    _, ref_res, ref_losses = scenario_credit(cube, grid, lam0, multipliers[reference],
                                             recovery, notional, seed, n_draws)
    ref_bound = solve_kl_bound(ref_losses, epsilon)
    policy_ncva = {}
    for sid in stressed:
        _, res, _ = scenario_credit(cube, grid, lam0, multipliers[sid],
                                    recovery, notional, seed, n_draws)
        policy_ncva[sid] = res.cva_bp - ref_res.cva_bp

    provider_csv = cfg_get(cfg, "nature.provider_csv", None)
    hybrid_requested = bool(cfg_get(cfg, "nature.hybrid", provider_csv is not None))
    summary_rows, quantile_rows, results = [], [], {"policy_only_bp": policy_ncva}

    if hybrid_requested:
        if provider_csv is None:
            raise DataError("hybrid mode requested but nature.provider_csv is absent")
        artifact.add_input(provider_csv)
        panels = load_provider_paths(provider_csv, base_year)
        ensemble = tail_factors(panels, tcfg.tail_mode)
        provider_name = cfg_get(cfg, "nature.provider_name", "providers")

        def provider_ncva(args):
            sid, i = args
            m = hybrid_multiplier(grid, stress[sid], stress[reference],
                                  ensemble.years, ensemble.factors[i], tcfg, sid,
                                  base_year=base_year)
            _, res, losses = scenario_credit(cube, grid, lam0, m, recovery,
                                             notional, seed, n_draws)
            return res.cva_bp - ref_res.cva_bp, res, losses

        all_vals = {}
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            for sid in stressed:
                tasks = [(sid, i) for i in range(len(ensemble.providers))]
                out = list(pool.map(provider_ncva, tasks))
                all_vals[sid] = out

        for sid in stressed:
            vals = np.array([v[0] for v in all_vals[sid]])
            summ = distribution_summary(vals, policy_ncva[sid])
            summary_rows.append((sid, provider_name, tcfg.tail_mode, summ.n,
                                 summ.policy_only, summ.median, summ.mean,
                                 summ.var95, summ.es95, summ.var99, summ.es99,
                                 summ.prob_negative))
            results.setdefault("summaries", {})[sid] = summ.__dict__
            # representative paths nearest the NCVA quantiles
            for q in (0.50, 0.95, 0.99):
                target = float(np.quantile(vals, q))
                k = int(np.argmin(np.abs(vals - target)))
                ncva_ind, res_k, losses_k = all_vals[sid][k]
                bound_k = solve_kl_bound(losses_k, epsilon)
                ecva_up, dwwr = delta_wwr(bound_k, ref_bound, res_k, ref_res)
                addon_s = bound_k.bound - res_k.cva
                addon_ref = ref_bound.bound - ref_res.cva
                quantile_rows.append((sid, provider_name, q, ncva_ind,
                                      BP * addon_s / notional,
                                      BP * addon_ref / notional,
                                      BP * dwwr / notional,
                                      BP * ecva_up / notional))
        hist_figure(out_dir, "ncva_summary",
                    {sid: np.array([v[0] for v in all_vals[sid]]) for sid in stressed},
                    "NCVA (bp of notional)", "Hybrid policy x tail NCVA")
    else:
        for sid in stressed:
            v = policy_ncva[sid]
            summ = distribution_summary([v], v)
            summary_rows.append((sid, "policy-only", tcfg.tail_mode, 1, v,
                                 summ.median, summ.mean, summ.var95, summ.es95,
                                 summ.var99, summ.es99, summ.prob_negative))

    write_table(out_dir, "ncva_summary",
                ["scenario", "provider", "mode", "n", "policy_only_bp", "median",
                 "mean", "var95", "es95", "var99", "es99", "prob_negative"],
                summary_rows)
    write_table(out_dir, "wwr_quantiles",
                ["scenario", "tail_source", "quantile", "ncva_ind_bp",
                 "wwr_addon_s_bp", "wwr_addon_ref_bp", "delta_wwr_bp",
                 "ncva_upper_bp"],
                quantile_rows)
    artifact.add_result("lambda0", lam0)
    artifact.add_result("epsilon", epsilon)
    artifact.add_result("nature", results)


@main.command("nature")
@_common_options
def cmd_nature(config_path, out_dir, seed):
    """Nature CVA: policy-only NCVA plus tail-generator distributions."""
    _run("nature", config_path, out_dir, seed, run_nature)


# ---------------------------------------------------------------------------


def load_member_ratios(path):
    """`member,year,value` CSV of per-member catch-ratio paths."""
    raw = {}
    for lineno, (member, year, value) in _read_rows(path, ["member", "year", "value"]):
        y = int(_parse_float(path, lineno, year, "year"))
        v = _parse_float(path, lineno, value, "value")
        raw.setdefault(member, []).append((y, v))
    if not raw:
        raise DataError(f"{path}: no member rows")
    members = {m: sorted(pts) for m, pts in raw.items()}
    year_sets = {m: [y for y, _ in pts] for m, pts in members.items()}
    all_years = next(iter(year_sets.values()))
    for m, ys in year_sets.items():
        if ys != all_years:
            raise DataError(f"{path}: member {m!r} has incomplete years")
    return (np.array(all_years),
            {m: np.array([v for _, v in pts]) for m, pts in members.items()})


def run_case_study(cfg, out_dir, artifact):
    curve, grid, _ = build_market(cfg, artifact)
    tcfg = translation_config(cfg)
    notional = float(cfg_get(cfg, "notional"))
    seed = int(cfg_get(cfg, "mc.seed"))
    lam0 = float(cfg_get(cfg, "case_study.lambda0", 0.0155))
    base_year = int(cfg_get(cfg, "case_study.base_year", tcfg.base_year))
    catch_csv = cfg_get(cfg, "case_study.catch_csv")
    artifact.add_input(catch_csv)
    years, members = load_member_ratios(catch_csv)
    cube = build_exposure(cfg, curve, grid)

    ref_m = reference_multiplier(grid, "ref")
    ref_rec = RecoveryPath.constant(grid, tcfg.recovery_base)
    ref_surv = survival_curve(apply_multiplier(flat_hazard_curve(grid, lam0), ref_m))
    ref_res = independence_cva(cube, ref_surv, ref_rec, notional, "ref")

    rows, results = [], {}
    final_year = int(years[-1])
    for member in sorted(members):
        ratios = members[member]
        cr_grid = annual_to_grid(years, ratios, grid, base_year)
        m_path, r_path = two_stage_transmission(grid, cr_grid, tcfg, member)
        surv = survival_curve(apply_multiplier(flat_hazard_curve(grid, lam0), m_path))
        res = independence_cva(cube, surv, r_path, notional, member)
        # annual averaging of the multiplier (arithmetic over calendar years)
        m_ann_path, _ = two_stage_transmission(years - base_year + 0.0, ratios, tcfg, member)
        m_final = float(m_ann_path.values[-1])
        rows.append((member, float(ratios.mean()), float(ratios.min()),
                     float(ratios.max()), float(np.mean(m_ann_path.values)), m_final,
                     res.cva_bp, res.cva_bp - ref_res.cva_bp))
        results[member] = {"cva_bp": res.cva_bp, "ncva_bp": res.cva_bp - ref_res.cva_bp,
                           "mean_multiplier": float(np.mean(m_ann_path.values)),
                           f"m_{final_year}": m_final}
    rows.append(("ref", 1.0, 1.0, 1.0, 1.0, 1.0, ref_res.cva_bp, 0.0))
    write_table(out_dir, "case_study",
                ["member", "mean_ratio", "min_ratio", "max_ratio",
                 "mean_multiplier", "m_final", "cva_bp", "ncva_bp"], rows)
    line_figure(out_dir, "case_study", years,
                {m: members[m] for m in sorted(members)},
                "year", "catch ratio (stressed / reference)")
    artifact.add_result("lambda0", lam0)
    artifact.add_result("case_study", results)
    artifact.add_result("reference_cva_bp", ref_res.cva_bp)


@main.command("case-study")
@_common_options
def cmd_case_study(config_path, out_dir, seed):
    """Two-stage transmission case study from per-member catch-ratio paths."""
    _run("case-study", config_path, out_dir, seed, run_case_study)


# ---------------------------------------------------------------------------


def load_forward_curve(path) -> CommodityCurveState:
    """`tenor_years,forward` CSV of the initial commodity forward curve."""
    pts = []
    for lineno, (tenor, fwd) in _read_rows(path, ["tenor_years", "forward"]):
        pts.append((_parse_float(path, lineno, tenor, "tenor"),
                    _parse_float(path, lineno, fwd, "forward")))
    pts.sort()
    return CommodityCurveState(np.array([p[0] for p in pts]),
                               np.array([p[1] for p in pts]))


def commodity_stress_multiplier(cfg, grid, artifact):
    """Hazard multiplier for the stressed corner: climate drivers or a scalar."""
    scenario = cfg_get(cfg, "commodity.stress_scenario", None)
    if scenario is not None and cfg_get(cfg, "scenarios.drivers_csv", None) is not None:
        multipliers, _ = climate_multipliers(cfg, grid, artifact)
        if scenario not in multipliers:
            raise DataError(f"stress scenario {scenario!r} not in driver data")
        return multipliers[scenario]
    from .translation import MultiplierPath
    scalar = cfg_get(cfg, "commodity.hazard_multiplier", None)
    if scalar is None:
        raise ValidationError("need commodity.stress_scenario with driver data "
                              "or commodity.hazard_multiplier")
    return MultiplierPath(grid, np.full(grid.shape, float(scalar)), "stressed")


def run_commodity(cfg, out_dir, artifact):
    curve, _, lam0 = build_market(cfg, artifact)
    notional_volume = float(cfg_get(cfg, "commodity.volume", 1.0))
    recovery = float(cfg_get(cfg, "credit.recovery"))
    seed = int(cfg_get(cfg, "mc.seed"))
    n_paths = int(cfg_get(cfg, "mc.exposure_paths", 5000))
    n_draws = int(cfg_get(cfg, "mc.loss_draws", 50000))
    maturity = float(cfg_get(cfg, "commodity.swap_maturity_years", 5.0))
    grid = uniform_grid(maturity, float(cfg_get(cfg, "grid.dt")))
    notional = float(cfg_get(cfg, "notional"))

    fwd_csv = cfg_get(cfg, "commodity.forward_csv")
    artifact.add_input(fwd_csv)
    m0 = load_forward_curve(fwd_csv)
    m1 = shift_forward_curve(m0, float(cfg_get(cfg, "commodity.market_shift", 0.85)))

    params = CommodityParams(
        float(cfg_get(cfg, "commodity.sigma0")),
        float(cfg_get(cfg, "commodity.kappa")),
        float(cfg_get(cfg, "commodity.sigma2", 0.15 * cfg_get(cfg, "commodity.sigma0"))),
        float(cfg_get(cfg, "commodity.rho_factors", 0.0)))
    models = ["1f"] + (["2f"] if bool(cfg_get(cfg, "commodity.two_factor", False)) else [])

    stress_mult = commodity_stress_multiplier(cfg, grid, artifact)
    base_hazard = flat_hazard_curve(grid, lam0)
    surv0 = survival_curve(base_hazard)
    surv1 = survival_curve(apply_multiplier(base_hazard, stress_mult))

    swap = make_commodity_swap(m0, maturity,
                               int(cfg_get(cfg, "commodity.settlements_per_year", 12)),
                               cfg_get(cfg, "commodity.fixed_price", None),
                               notional_volume)

    corner_rows, results = [], {}
    sweep_rows = []
    for model in models:
        cubes = {}
        for label, state in (("M0", m0), ("M1", m1)):
            paths = simulate_wti_futures(model, params, state, grid, n_paths, seed)
            cubes[label] = commodity_swap_exposure(paths, swap, curve)
        cva = {}
        for i, surv in (("0", surv0), ("1", surv1)):
            for j, label in (("0", "M0"), ("1", "M1")):
                cva[i + j] = independence_cva(cubes[label], surv, recovery,
                                              notional, f"l{i}_{label}").cva
        from .cva import corner_decomposition
        dec = corner_decomposition(cva["00"], cva["10"], cva["01"], cva["11"])
        corner_rows.append((model, dec.cva_00, dec.cva_10, dec.cva_01, dec.cva_11,
                            dec.credit, dec.market, dec.interaction, dec.total,
                            dec.interaction_share))
        results[model] = {
            "corners": {k: v for k, v in cva.items()},
            "credit": dec.credit, "market": dec.market,
            "interaction": dec.interaction, "total": dec.total,
            "interaction_share": dec.interaction_share}
        if model == models[0]:
            losses_s = sample_losses(cubes["M0"], surv1, recovery, n_draws, seed,
                                     notional, "stressed")
            losses_ref = sample_losses(cubes["M0"], surv0, recovery, n_draws, seed,
                                       notional, "reference")
            eps_list = list(cfg_get(cfg, "epsilon.sweep", [0.01, 0.05, 0.10, 0.20]))
            sweep_rows = eps_sweep(losses_s, losses_ref, eps_list)
            epe_m0 = epe_profile(cubes["M0"])
            epe_m1 = epe_profile(cubes["M1"])
            line_figure(out_dir, "corners", grid,
                        {"EPE M0": epe_m0, "EPE M1": epe_m1},
                        "time (years)", "EPE", "Market stress compresses EPE")

    write_table(out_dir, "corners",
                ["model", "cva_00", "cva_10", "cva_01", "cva_11", "credit",
                 "market", "interaction", "total", "interaction_share"],
                corner_rows)
    write_table(out_dir, "eps_sweep",
                ["epsilon", "cva_ind", "cva_upper", "wwr"],
                [(e, ind, up, wwr) for e, ind, up, wwr in sweep_rows])
    line_figure(out_dir, "eps_sweep", [r[0] for r in sweep_rows],
                {"WWR add-on": [r[3] for r in sweep_rows]},
                "KL radius epsilon", "scenario-relative WWR")
    artifact.add_result("lambda0", lam0)
    artifact.add_result("commodity", results)


@main.command("commodity")
@_common_options
def cmd_commodity(config_path, out_dir, seed):
    """WTI swap corner decomposition (credit/market/interaction) and eps sweep."""
    _run("commodity", config_path, out_dir, seed, run_commodity)


# ---------------------------------------------------------------------------


def run_calibrate_eps(cfg, out_dir, artifact):
    curve, grid, lam0 = build_market(cfg, artifact)
    notional = float(cfg_get(cfg, "notional"))
    recovery = float(cfg_get(cfg, "credit.recovery"))
    seed = int(cfg_get(cfg, "mc.seed"))
    n_draws = int(cfg_get(cfg, "mc.loss_draws", 50000))

    cal = cfg.get("epsilon", {}).get("calibration", {})
    window = int(cal.get("rolling_window", 60))
    vol_window = int(cal.get("vol_window", 20))
    vol_q = float(cal.get("vol_quantile", 0.90))
    tail_q = float(cal.get("tail_quantile", 0.95))
    side = cal.get("side", "short")

    proxy_csv = cfg_get(cfg, "market_data.proxy_csv")
    spread_csv = cfg_get(cfg, "market_data.spread_csv")
    artifact.add_input(proxy_csv)
    artifact.add_input(spread_csv)
    x = log_returns(load_daily_series(proxy_csv, "proxy"))
    y = differences(load_daily_series(spread_csv, "spread"))

    rolling = rolling_directional_rho(x, y, window)
    dates, xs, _ = inner_join(x, y)
    vols = realized_vol(xs, vol_window)
    vol_by_date = dict(zip(dates[vol_window - 1:], vols))
    keep = [i for i, d in enumerate(rolling.dates) if d in vol_by_date]
    rho_series = (rolling.rho_short if side == "short" else rolling.rho_long)[keep]
    vol_series = np.array([vol_by_date[rolling.dates[i]] for i in keep])
    target = stressed_target(rho_series, vol_series, vol_q, tail_q, side, window)

    multipliers, reference = climate_multipliers(cfg, grid, artifact)
    scenario = cal.get("scenario") or next(
        s for s in multipliers if s != reference)
    cube = build_exposure(cfg, curve, grid)
    base = flat_hazard_curve(grid, lam0)
    surv_s = survival_curve(apply_multiplier(base, multipliers[scenario]))
    surv_ref = survival_curve(apply_multiplier(base, multipliers[reference]))

    eps_grid = np.array(cal.get("eps_grid",
                                [1e-4, 3e-4, 1e-3, 3e-3, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5]))
    rho_grid = np.array(cal.get("rho_grid", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]))
    try:
        curve_out, eps_star = build_equivalence_and_invert(
            cube, surv_s, surv_ref, recovery, notional, eps_grid, rho_grid,
            target.rho_target, n_draws, seed)
    except EnvCvaError as exc:
        artifact.add_result("calibration_error", {"type": type(exc).__name__,
                                                  "message": str(exc)})
        artifact.write(out_dir)
        raise

    write_table(out_dir, "calibration",
                ["epsilon", "addon_eps", "rho_equiv"],
                [(float(e), float(a), float(r)) for e, a, r in
                 zip(curve_out.eps_grid, curve_out.addon_eps, curve_out.rho_equiv)])
    write_table(out_dir, "calibration_rho",
                ["rho", "addon_rho"],
                [(float(r), float(a)) for r, a in
                 zip(curve_out.rho_grid, curve_out.addon_rho)])
    line_figure(out_dir, "calibration", curve_out.eps_grid,
                {"rho_equiv": np.nan_to_num(curve_out.rho_equiv, nan=np.nan)},
                "KL radius epsilon", "equivalent copula correlation")
    artifact.add_result("dependence_target", {
        "rho_target": target.rho_target, "regime": target.regime,
        "window": window, "vol_window": vol_window, "vol_quantile": vol_q,
        "tail_quantile": tail_q, "side": side,
        "skipped_windows": rolling.skipped_windows})
    artifact.add_result("scenario", scenario)
    artifact.add_result("eps_star", eps_star)


@main.command("calibrate-eps")
@_common_options
def cmd_calibrate_eps(config_path, out_dir, seed):
    """Calibrate the KL radius from market co-movements (steps 1 and 2)."""
    _run("calibrate-eps", config_path, out_dir, seed, run_calibrate_eps)


# ---------------------------------------------------------------------------


def run_wwr_sweep(cfg, out_dir, artifact):
    curve, grid, lam0 = build_market(cfg, artifact)
    notional = float(cfg_get(cfg, "notional"))
    recovery = float(cfg_get(cfg, "credit.recovery"))
    seed = int(cfg_get(cfg, "mc.seed"))
    n_draws = int(cfg_get(cfg, "mc.loss_draws", 50000))
    eps_list = list(cfg_get(cfg, "epsilon.sweep", [0.01, 0.05, 0.10, 0.20]))

    multipliers, reference = climate_multipliers(cfg, grid, artifact)
    scenario = cfg_get(cfg, "epsilon.sweep_scenario",
                       next(s for s in multipliers if s != reference))
    cube = build_exposure(cfg, curve, grid)
    _, res_s, losses_s = scenario_credit(cube, grid, lam0, multipliers[scenario],
                                         recovery, notional, seed, n_draws)
    _, res_ref, losses_ref = scenario_credit(cube, grid, lam0, multipliers[reference],
                                             recovery, notional, seed, n_draws)
    rows = eps_sweep(losses_s, losses_ref, eps_list)
    write_table(out_dir, "eps_sweep", ["epsilon", "cva_ind", "cva_upper", "wwr"], rows)
    line_figure(out_dir, "eps_sweep", [r[0] for r in rows],
                {"WWR add-on": [r[3] for r in rows]},
                "KL radius epsilon", "scenario-relative WWR")

    bound = solve_kl_bound(losses_s, float(eps_list[-1]))
    pmf_p, pmf_q, epe_p, epe_q = marginal_distortion(losses_s, bound.weights, cube)
    write_table(out_dir, "marginal_distortion",
                ["time", "pmf_p", "pmf_q", "epe_p", "epe_q"],
                [(float(cube.grid[i + 1] if i < cube.grid.size - 1 else cube.grid[-1]),
                  float(pmf_p[i]), float(pmf_q[i]),
                  float(epe_p[i + 1] if i < cube.grid.size - 1 else epe_p[-1]),
                  float(epe_q[i + 1] if i < cube.grid.size - 1 else epe_q[-1]))
                 for i in range(pmf_p.size)])
    line_figure(out_dir, "marginal_distortion", cube.grid[1:],
                {"default pmf P": pmf_p[:-1], "default pmf Q*": pmf_q[:-1]},
                "time (years)", "interval default mass")
    artifact.add_result("scenario", scenario)
    artifact.add_result("sweep", [{"epsilon": e, "ecva_ind": i, "ecva_upper": u,
                                   "wwr": w} for e, i, u, w in rows])


@main.command("wwr-sweep")
@_common_options
def cmd_wwr_sweep(config_path, out_dir, seed):
    """Epsilon sweep of the robust WWR plus worst-case marginal diagnostics."""
    _run("wwr-sweep", config_path, out_dir, seed, run_wwr_sweep)


if __name__ == "__main__":
    main()
