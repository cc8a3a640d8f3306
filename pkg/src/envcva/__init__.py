"""Environmental CVA engine.

Maps climate and nature scenario files into counterparty hazard curves,
simulates derivative exposure, computes independence CVA and
scenario-relative ECVA, and bounds wrong-way risk by worst-case
reweighting over a KL-divergence ball.
"""

__version__ = "0.1.0"

from .market_data import (  # noqa: F401
    DailySeries,
    DiscountCurve,
    ProviderPathPanel,
    ScenarioDriverPanel,
    YieldQuoteSet,
    build_discount_curve,
    load_daily_series,
    load_provider_paths,
    load_scenario_drivers,
    interpolate_to_grid,
    load_yield_quotes,
)
from .credit_curves import (  # noqa: F401
    HazardCurve,
    RecoveryPath,
    SurvivalCurve,
    apply_multiplier,
    calibrate_flat_hazard,
    cds_par_spread,
    flat_hazard_curve,
    interval_default_probs,
    survival_curve,
)
from .exposure import (  # noqa: F401
    CommodityCurveState,
    CommodityParams,
    ExposureCube,
    HW1FParams,
    SwapSpec,
    commodity_swap_exposure,
    compute_exposure_cube,
    epe_profile,
    make_commodity_swap,
    make_swap_spec,
    shift_forward_curve,
    simulate_hw1f_paths,
    simulate_wti_futures,
    swap_value,
    uniform_grid,
    zcb_price,
)
from .translation import (  # noqa: F401
    MultiplierPath,
    TailFactorEnsemble,
    TranslationConfig,
    climate_multiplier,
    hybrid_multiplier,
    nature_policy_multiplier,
    reference_multiplier,
    tail_factors,
    two_stage_transmission,
)
from .cva import (  # noqa: F401
    CornerDecomposition,
    CvaResult,
    DistributionSummary,
    LossSampleSet,
    corner_decomposition,
    distribution_summary,
    ecva_relative,
    independence_cva,
    sample_losses,
)
from .robust import (  # noqa: F401
    KlBudget,
    RobustBound,
    delta_wwr,
    dual_objective,
    eps_sweep,
    marginal_distortion,
    solve_kl_bound,
)
from .calibration import (  # noqa: F401
    DependenceTarget,
    EquivalenceCurve,
    build_equivalence_and_invert,
    copula_diagnostic_cva,
    kendall_tau,
    latent_rho,
    rolling_directional_rho,
    stressed_target,
)
