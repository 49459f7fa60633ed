"""Command-line front end.

Commands::

    sdebreaks fit-gbm      --bars FILE --events FILE --ticker T
    sdebreaks fit-cev      --bars FILE --events FILE --ticker T
    sdebreaks batch-report --bars DIR  --events FILE --model {gbm,cev}
    sdebreaks simulate     --model {gbm,cev,gbm-euler} --mu M --sigma S ...

Reports go to stdout, diagnostics to stderr. Exit codes: 0 success,
1 internal error, 2 inadmissible event or nothing to report, 3 insufficient
data, 4 bad arguments or input.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from datetime import time
from pathlib import Path

from .breaks import BreakRow, ModelKind, build_report
from .errors import CalendarError, IngestError, InsufficientDataError, InvalidInputError
from .gbm import GbmParams, estimate_gbm, gbm_path
from .gridsearch import (
    DEFAULT_COUNTS,
    DEFAULT_GAMMA_RANGE,
    DEFAULT_KL_BINS,
    ObjectiveKind,
    build_grid,
    fit_jump_cev,
)
from .ingest import filter_admissible, load_bars, load_calendar, load_events, write_bars
from .sde import DEFAULT_JUMPS, CevParams, NoisePath, apply_jump_initial, euler_cev_path, gbm_euler_path
from .timeseries import (
    DEFAULT_BARS_PER_SIDE,
    MARKET_OPEN,
    EventSpec,
    PriceSeries,
    TradingCalendar,
    break_time,
    exclusion_reason,
    split_window,
)

log = logging.getLogger("sdebreaks")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INADMISSIBLE = 2
EXIT_INSUFFICIENT = 3
EXIT_BAD_ARGS = 4


class CliExit(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _float_pair(text: str) -> tuple[float, float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 2:
        raise ValueError(f"expected 'lo,hi', got {text!r}")
    return float(parts[0]), float(parts[1])


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.replace(" ", "").split(",") if p)


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class RunConfig:
    bars_per_side: int = DEFAULT_BARS_PER_SIDE
    n_mu: int = DEFAULT_COUNTS[0]
    n_sigma: int = DEFAULT_COUNTS[1]
    n_gamma: int = DEFAULT_COUNTS[2]
    gamma_range: tuple[float, float] = DEFAULT_GAMMA_RANGE
    jump_set: tuple[float, ...] = DEFAULT_JUMPS
    objective: ObjectiveKind = ObjectiveKind.MSE
    seed: int = 42
    kl_bins: int = DEFAULT_KL_BINS
    # fixed axis ranges; None derives them from each window side
    mu_range: tuple[float, float] | None = None
    sigma_range: tuple[float, float] | None = None
    holidays: str | None = None
    market_open: time = MARKET_OPEN
    workers: int = 1
    mu_relative: bool = False

    _PARSERS = {
        "bars_per_side": int,
        "n_mu": int,
        "n_sigma": int,
        "n_gamma": int,
        "gamma_range": _float_pair,
        "jump_set": _float_list,
        "objective": ObjectiveKind,
        "seed": int,
        "kl_bins": int,
        "mu_range": _float_pair,
        "sigma_range": _float_pair,
        "holidays": str,
        "market_open": time.fromisoformat,
        "workers": int,
        "mu_relative": _bool,
    }

    def __post_init__(self):
        if self.bars_per_side < 3:
            raise InvalidInputError("bars_per_side must be at least 3")
        for name in ("n_mu", "n_sigma", "n_gamma", "workers"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be at least 1")
        if self.kl_bins < 2:
            raise InvalidInputError("kl_bins must be at least 2")
        if not self.gamma_range[0] < self.gamma_range[1]:
            raise InvalidInputError("gamma_range must satisfy lo < hi")
        if not self.jump_set or min(self.jump_set) <= 0:
            raise InvalidInputError("jump_set must be non-empty and positive")
        for name in ("mu_range", "sigma_range"):
            rng = getattr(self, name)
            if rng is not None and not rng[0] <= rng[1]:
                raise InvalidInputError(f"{name} must satisfy lo <= hi")

    @classmethod
    def parse_value(cls, key: str, text: str):
        if key not in cls._PARSERS:
            raise InvalidInputError(f"unknown config key {key!r}")
        try:
            return cls._PARSERS[key](text)
        except ValueError as exc:
            raise InvalidInputError(f"bad value for {key}: {exc}") from None

    @classmethod
    def from_file(cls, path) -> dict:
        """Parse a ``key = value`` file into overrides; ``#`` starts a comment."""
        values = {}
        for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInputError(f"{path}:{line_no}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = cls.parse_value(key.strip(), value.strip())
        return values

    @property
    def counts(self) -> tuple[int, int, int]:
        return self.n_mu, self.n_sigma, self.n_gamma


# ---------------------------------------------------------------------------
# Fitting pipeline


@dataclass
class EventFit:
    row: BreakRow
    observed: PriceSeries
    fitted: PriceSeries
    candidates: tuple[int, int] | None = None


def _window(series: PriceSeries, event: EventSpec, config: RunConfig, calendar: TradingCalendar):
    return split_window(series, break_time(event, calendar, config.market_open), config.bars_per_side)


def _noise(config: RunConfig, n_left: int, n_right: int) -> tuple[NoisePath, NoisePath]:
    return (
        NoisePath.generate(config.seed, n_left - 1),
        NoisePath.generate(config.seed + 1, n_right - 1),
    )


def _restamp(prices, like: PriceSeries) -> PriceSeries:
    return PriceSeries(like.timestamps, prices, like.bar_interval)


def fit_gbm_event(series, event, config, calendar) -> EventFit:
    window = _window(series, event, config, calendar)
    left, right = estimate_gbm(window.left), estimate_gbm(window.right)
    noise_l, noise_r = _noise(config, len(window.left), len(window.right))
    sim_l = gbm_path(left, float(window.left.prices[0]), len(window.left) - 1, noise_l)
    sim_r = gbm_path(right, float(window.left.prices[-1]), len(window.right) - 1, noise_r)
    observed = window.left.concat(window.right)
    fitted = _restamp(list(sim_l.prices) + list(sim_r.prices), observed)
    return EventFit(BreakRow.from_gbm(event.ticker, left, right), observed, fitted)


def fit_cev_event(series, event, config, calendar) -> EventFit:
    window = _window(series, event, config, calendar)
    grid_kwargs = dict(
        counts=config.counts,
        gamma_range=config.gamma_range,
        jump_values=config.jump_set,
        mu_range=config.mu_range,
        sigma_range=config.sigma_range,
        relative_mu=config.mu_relative,
    )
    left_grid = build_grid(window.left, **grid_kwargs)
    right_grid = build_grid(window.right, **grid_kwargs)
    noise_l, noise_r = _noise(config, len(window.left), len(window.right))
    left, right = fit_jump_cev(
        window,
        left_grid,
        config.objective,
        noise_l,
        noise_r,
        right_grid=right_grid,
        n_bins=config.kl_bins,
        workers=config.workers,
    )
    log.info("%s: left candidates %d, right candidates %d", event.ticker, left.n_candidates, right.n_candidates)
    log.info(
        "%s: left %s obj=%.6g; right %s jump=%s obj=%.6g",
        event.ticker, left.params, left.objective_value, right.params, right.jump.y, right.objective_value,
    )
    sim_l = euler_cev_path(left.params, float(window.left.prices[0]), len(window.left) - 1, noise_l)
    right_s0 = apply_jump_initial(float(window.left.prices[-1]), right.jump)
    sim_r = euler_cev_path(right.params, right_s0, len(window.right) - 1, noise_r)
    observed = window.left.concat(window.right)
    fitted = _restamp(list(sim_l.prices) + list(sim_r.prices), observed)
    return EventFit(
        BreakRow.from_cev(event.ticker, left, right),
        observed,
        fitted,
        (left.n_candidates, right.n_candidates),
    )


FITTERS = {ModelKind.GBM_MLE: fit_gbm_event, ModelKind.CEV_JUMP: fit_cev_event}


# ---------------------------------------------------------------------------
# Commands


def _config(args) -> RunConfig:
    values = RunConfig.from_file(args.config) if getattr(args, "config", None) else {}
    for key in ("seed", "objective", "bars_per_side", "jump_set", "kl_bins", "holidays", "workers"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = RunConfig.parse_value(key, str(flag)) if isinstance(flag, str) else flag
    return RunConfig(**values)


def _write_paths(fit: EventFit, out_dir: Path, ticker: str, model: ModelKind) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_bars(fit.observed, out_dir / f"{ticker}_{model.value}_observed.csv")
    write_bars(fit.fitted, out_dir / f"{ticker}_{model.value}_fitted.csv")


def cmd_fit(args, model: ModelKind) -> int:
    config = _config(args)
    calendar = load_calendar(config.holidays)
    events = [e for e in load_events(args.events) if e.ticker == args.ticker]
    if not events:
        raise CliExit(EXIT_BAD_ARGS, f"unknown ticker {args.ticker!r}")
    event = events[0]
    try:
        reason = exclusion_reason(event, calendar)
    except CalendarError as exc:
        raise CliExit(EXIT_INADMISSIBLE, f"{event.ticker}: {exc}") from None
    if reason is not None:
        raise CliExit(EXIT_INADMISSIBLE, f"{event.ticker}: inadmissible event ({reason})")
    fit = FITTERS[model](load_bars(args.bars), event, config, calendar)
    if fit.candidates is not None:
        log.info("right-side candidates: %d", fit.candidates[1])
    _write_paths(fit, Path(args.out_dir), event.ticker, model)
    sys.stdout.write(build_report([fit.row], args.format, model))
    return EXIT_OK


def cmd_batch_report(args) -> int:
    config = _config(args)
    model = ModelKind(args.model)
    calendar = load_calendar(config.holidays)
    events = load_events(args.events)
    _, dropped = filter_admissible(events, calendar)
    reasons = {id(e): reason for e, reason in dropped}
    bars_dir = Path(args.bars)
    rows = []
    for event in events:
        if id(event) in reasons:
            print(f"dropped {event.ticker}: {reasons[id(event)]}", file=sys.stderr)
            continue
        path = bars_dir / f"{event.ticker}.csv"
        if not path.exists():
            print(f"skipped {event.ticker}: no-bars-file", file=sys.stderr)
            continue
        try:
            fit = FITTERS[model](load_bars(path), event, config, calendar)
        except InsufficientDataError as exc:
            print(f"skipped {event.ticker}: {exc}", file=sys.stderr)
            continue
        if args.out_dir:
            _write_paths(fit, Path(args.out_dir), event.ticker, model)
        rows.append(fit.row)
    if not rows:
        raise CliExit(EXIT_INADMISSIBLE, "no admissible events with data")
    sys.stdout.write(build_report(rows, args.format, model))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.s0 <= 0 or args.n_bars < 1 or args.sigma < 0 or args.gamma < 0:
        raise CliExit(EXIT_BAD_ARGS, "invalid simulation parameters")
    noise = NoisePath.generate(args.seed, args.n_bars)
    if args.model == "gbm":
        path = gbm_path(GbmParams(args.mu, args.sigma), args.s0, args.n_bars, noise)
    elif args.model == "gbm-euler":
        path = gbm_euler_path(args.mu, args.sigma, args.s0, args.n_bars, noise)
    else:
        path = euler_cev_path(CevParams(args.mu, args.sigma, args.gamma), args.s0, args.n_bars, noise)
    write_bars(path, sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_ARGS, f"{self.prog}: error: {message}\n")


def _shared(p: argparse.ArgumentParser, bars_help: str) -> None:
    p.add_argument("--bars", required=True, help=bars_help)
    p.add_argument("--events", required=True, help="events CSV (ticker,report_time,session)")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--objective", choices=[k.value for k in ObjectiveKind])
    p.add_argument("--bars-per-side", dest="bars_per_side", type=int)
    p.add_argument("--jump-set", dest="jump_set", help="comma-separated jump factors")
    p.add_argument("--kl-bins", dest="kl_bins", type=int)
    p.add_argument("--holidays", help="file of YYYY-MM-DD holidays")
    p.add_argument("--workers", type=int, help="threads for grid evaluation")
    p.add_argument("--format", choices=["tsv", "csv"], default="tsv")
    p.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdebreaks", description="Fit SDE models around earnings events.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_text in (
        ("fit-gbm", "GBM maximum-likelihood fit either side of one event"),
        ("fit-cev", "jump-CEV grid-search fit either side of one event"),
    ):
        p = sub.add_parser(name, help=help_text)
        _shared(p, "bars CSV (timestamp,price)")
        p.add_argument("--ticker", required=True)
        p.add_argument("--out-dir", dest="out_dir", default=".", help="where path files go")

    p = sub.add_parser("batch-report", help="one report row per admissible event")
    _shared(p, "directory of <ticker>.csv bar files")
    p.add_argument("--model", required=True, choices=[k.value for k in ModelKind])
    p.add_argument("--out-dir", dest="out_dir", help="also write path files here")

    p = sub.add_parser("simulate", help="print a simulated path as timestamp,price CSV")
    p.add_argument("--model", required=True, choices=["gbm", "cev", "gbm-euler"])
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--n-bars", dest="n_bars", type=int, default=390)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--verbose", "-v", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        if args.command == "fit-gbm":
            return cmd_fit(args, ModelKind.GBM_MLE)
        if args.command == "fit-cev":
            return cmd_fit(args, ModelKind.CEV_JUMP)
        if args.command == "batch-report":
            return cmd_batch_report(args)
        return cmd_simulate(args)
    except CliExit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except CalendarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except (InvalidInputError, IngestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except Exception as exc:  # pragma: no cover - last-resort contract
        log.exception("internal error")
        print(f"error: internal: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
