"""Before/after parameter comparison and report tables."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import InvalidInputError
from .gbm import GbmParams
from .gridsearch import FitResult
from .sde import JumpFactor

NA = "NA"


class ModelKind(str, enum.Enum):
    GBM_MLE = "gbm"
    CEV_JUMP = "cev"


GBM_COLUMNS = ("ticker", "mu change %", "mu ratio r/l", "sigma change %", "sigma ratio r/l")
CEV_COLUMNS = GBM_COLUMNS + ("jump %", "gamma change %", "gamma ratio r/l")


def ratio_rl(left: float, right: float) -> float | None:
    """``right / left``, or None when ``left`` is zero or the ratio overflows."""
    if left == 0:
        return None
    ratio = right / left
    return ratio if math.isfinite(ratio) else None


def change_pct(left: float, right: float) -> float | None:
    ratio = ratio_rl(left, right)
    return None if ratio is None else (ratio - 1) * 100


def jump_pct(jump: JumpFactor) -> float:
    return (jump.y - 1) * 100


@dataclass(frozen=True)
class ParamChange:
    name: str
    left: float
    right: float

    @property
    def ratio(self) -> float | None:
        return ratio_rl(self.left, self.right)

    @property
    def change_pct(self) -> float | None:
        return change_pct(self.left, self.right)


@dataclass(frozen=True)
class BreakRow:
    ticker: str
    model: ModelKind
    params: tuple[ParamChange, ...]
    jump_pct: float | None = None

    def __post_init__(self):
        names = tuple(p.name for p in self.params)
        expected = ("mu", "sigma", "gamma") if self.model is ModelKind.CEV_JUMP else ("mu", "sigma")
        if names != expected:
            raise InvalidInputError(f"{self.model.name} row needs params {expected}, got {names}")
        if (self.jump_pct is None) == (self.model is ModelKind.CEV_JUMP):
            raise InvalidInputError("jump_pct must be present exactly for CEV_JUMP rows")

    def param(self, name: str) -> ParamChange:
        return next(p for p in self.params if p.name == name)

    @classmethod
    def from_gbm(cls, ticker: str, left: GbmParams, right: GbmParams) -> BreakRow:
        return cls(
            ticker,
            ModelKind.GBM_MLE,
            (ParamChange("mu", left.mu, right.mu), ParamChange("sigma", left.sigma, right.sigma)),
        )

    @classmethod
    def from_cev(cls, ticker: str, left: FitResult, right: FitResult) -> BreakRow:
        lp, rp = left.params, right.params
        return cls(
            ticker,
            ModelKind.CEV_JUMP,
            (
                ParamChange("mu", lp.mu, rp.mu),
                ParamChange("sigma", lp.sigma, rp.sigma),
                ParamChange("gamma", lp.gamma, rp.gamma),
            ),
            jump_pct(right.jump or JumpFactor(1.0)),
        )


def format_value(value: float | None) -> str:
    """Two decimals with an explicit sign; None renders as NA."""
    if value is None or not math.isfinite(value):
        return NA
    text = f"{value:+.2f}"
    # never print a signed zero as "-0.00"
    return "+0.00" if text == "-0.00" else text


def _cells(row: BreakRow) -> list[str]:
    mu, sigma = row.param("mu"), row.param("sigma")
    cells = [
        row.ticker,
        format_value(mu.change_pct),
        format_value(mu.ratio),
        format_value(sigma.change_pct),
        format_value(sigma.ratio),
    ]
    if row.model is ModelKind.CEV_JUMP:
        gamma = row.param("gamma")
        cells += [format_value(row.jump_pct), format_value(gamma.change_pct), format_value(gamma.ratio)]
    return cells


def build_report(rows: Iterable[BreakRow], fmt: str = "tsv", model: ModelKind | None = None) -> str:
    """Render rows as a GBM (4 data columns) or CEV_JUMP (7 data columns) table.

    ``model`` picks the header for an empty row list (GBM by default).
    """
    rows = list(rows)
    kinds = {r.model for r in rows}
    if len(kinds) > 1:
        raise InvalidInputError("report rows mix model kinds")
    if model is not None:
        model = ModelKind(model)
        if kinds and kinds != {model}:
            raise InvalidInputError("rows do not match requested model kind")
    kind = kinds.pop() if kinds else (model or ModelKind.GBM_MLE)
    header = CEV_COLUMNS if kind is ModelKind.CEV_JUMP else GBM_COLUMNS
    if fmt not in ("tsv", "csv"):
        raise InvalidInputError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t" if fmt == "tsv" else ",", lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(_cells(row))
    return buf.getvalue()


def parse_report(text: str, fmt: str = "tsv") -> list[dict[str, str | float | None]]:
    """Read a document written by build_report back into column dicts."""
    reader = csv.DictReader(io.StringIO(text), delimiter="\t" if fmt == "tsv" else ",")
    out = []
    for rec in reader:
        parsed: dict[str, str | float | None] = {}
        for key, value in rec.items():
            if key == "ticker":
                parsed[key] = value
            else:
                parsed[key] = None if value == NA else float(value)
        out.append(parsed)
    return out
