"""Robust sequential monitoring of parameter change via density power
divergence, for i.i.d. Gaussian data and GARCH(p,q) time series."""

from dpdmon._backend import HAVE_COMPILED, backend_name
from dpdmon.core import (
    Alpha,
    BoundaryFn,
    ConstantBoundary,
    FitResult,
    NormKind,
    inv_spd,
    inv_sqrt_spd,
    vector_norm,
)
from dpdmon.critval import (
    CritvalKind,
    CritvalRequest,
    critical_value,
    critical_value_retro,
    critical_value_sequential,
    sup_abs_bm_cdf,
)
from dpdmon.exceptions import (
    ConfigurationError,
    DegenerateDataError,
    DimensionError,
    DPDError,
    OptimizationError,
    SingularInformationError,
    UndefinedRatioError,
)
from dpdmon.garch import (
    GarchParams,
    VolState,
    grad_l_alpha_garch,
    info_hat_garch,
    k_g_constants,
    l_alpha_garch,
    mdpde_fit_garch,
    vol_init,
    vol_path_with_grads,
    vol_step,
)
from dpdmon.monitor import (
    MonitorOutcome,
    MonitorState,
    monitor_init,
    monitor_step,
    run_monitor,
)
from dpdmon.normal import (
    NormalTheta,
    grad_l_alpha_normal,
    info_hat_normal,
    l_alpha_normal,
    mdpde_fit_normal,
)
from dpdmon.retro import RetroResult, monitor_and_locate, partial_score_path, retro_test
from dpdmon.simlab import (
    ExperimentReport,
    Scenario,
    contaminate,
    delay_ratio_table,
    parse_scenario_config,
    run_scenario,
    simulate_garch_path,
)

__version__ = "0.1.0"

__all__ = [
    "Alpha",
    "BoundaryFn",
    "ConfigurationError",
    "ConstantBoundary",
    "CritvalKind",
    "CritvalRequest",
    "DPDError",
    "DegenerateDataError",
    "DimensionError",
    "ExperimentReport",
    "FitResult",
    "GarchParams",
    "HAVE_COMPILED",
    "MonitorOutcome",
    "MonitorState",
    "NormKind",
    "NormalTheta",
    "OptimizationError",
    "RetroResult",
    "Scenario",
    "SingularInformationError",
    "UndefinedRatioError",
    "VolState",
    "backend_name",
    "contaminate",
    "critical_value",
    "critical_value_retro",
    "critical_value_sequential",
    "delay_ratio_table",
    "grad_l_alpha_garch",
    "grad_l_alpha_normal",
    "info_hat_garch",
    "info_hat_normal",
    "inv_spd",
    "inv_sqrt_spd",
    "k_g_constants",
    "l_alpha_garch",
    "l_alpha_normal",
    "mdpde_fit_garch",
    "mdpde_fit_normal",
    "monitor_and_locate",
    "monitor_init",
    "monitor_step",
    "parse_scenario_config",
    "partial_score_path",
    "retro_test",
    "run_monitor",
    "run_scenario",
    "simulate_garch_path",
    "sup_abs_bm_cdf",
    "vector_norm",
    "vol_init",
    "vol_path_with_grads",
    "vol_step",
]
