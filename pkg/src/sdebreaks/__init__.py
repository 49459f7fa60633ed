"""Structural-break analysis of price series with SDE models.

GBM parameters come from closed-form maximum likelihood; CEV and jump-CEV
parameters from exhaustive grid search under common random numbers.
"""
from .breaks import BreakRow, ModelKind, ParamChange, build_report, change_pct, jump_pct, parse_report, ratio_rl
from .errors import (
    CalendarError,
    IngestError,
    InsufficientDataError,
    InvalidInputError,
    ParseError,
    SdeBreaksError,
    ValidationError,
)
from .gbm import GbmParams, estimate_gbm, gbm_path
from .gridsearch import (
    FitResult,
    GridSpec,
    ObjectiveKind,
    build_grid,
    fit_jump_cev,
    grid_search_fit,
    grid_search_jump_fit,
    mu_interval,
    objective_kl,
    objective_mape,
    objective_mse,
    sigma_interval,
    sigma_point,
)
from .ingest import filter_admissible, load_bars, load_events, load_holidays, write_bars
from .sde import CevParams, JumpFactor, NoisePath, apply_jump_initial, euler_cev_path, gbm_euler_path
from .timeseries import (
    EventSpec,
    EventWindow,
    PricePoint,
    PriceSeries,
    Session,
    TradingCalendar,
    arithmetic_diffs,
    break_time,
    effective_report_day,
    is_admissible_event,
    log_returns,
    split_window,
)

__version__ = "0.1.0"
