"""Run cost accounting and the cost-weighted value score."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from statistics import fmean
from typing import Iterable, Mapping, Sequence

COST_KINDS = ("remote", "local")

# USD per 1M (input, output) tokens; provider prices drift, so these are only defaults.
DEFAULT_RATES: dict[str, tuple[float, float]] = {
    "gpt-4o": (5.0, 15.0),
    "gpt-3.5-turbo": (0.5, 1.5),
}


def monetary_cost(input_tokens: int, output_tokens: int, rates: tuple[float, float]) -> float:
    if input_tokens < 0 or output_tokens < 0 or rates[0] < 0 or rates[1] < 0:
        raise ValueError("token counts and rates must be non-negative")
    return input_tokens * rates[0] / 1e6 + output_tokens * rates[1] / 1e6


def mean_run_time(durations: Sequence[float]) -> float:
    """Average wall-clock time of repeated runs of one configuration."""
    if not durations:
        raise ValueError("no timing runs")
    return fmean(durations)


@dataclass(frozen=True)
class CostRecord:
    config_id: str
    cost: float  # USD for remote backends, seconds for local ones
    kind: str
    f1: float

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"cost kind must be one of {COST_KINDS}")
        if self.cost < 0:
            raise ValueError("cost must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ValueEntry:
    config_id: str
    kind: str
    cost: float
    f1: float
    normalized_cost: float
    value: float


@dataclass(frozen=True)
class ValueReport:
    entries: tuple[ValueEntry, ...]

    def __getitem__(self, config_id: str) -> ValueEntry:
        for e in self.entries:
            if e.config_id == config_id:
                return e
        raise KeyError(config_id)

    def best(self, kind: str) -> ValueEntry | None:
        pool = [e for e in self.entries if e.kind == kind]
        return max(pool, key=lambda e: (e.value, e.f1, e.config_id), default=None)

    def to_dict(self) -> dict:
        return {"entries": [asdict(e) for e in self.entries]}


def value(records: Iterable[CostRecord]) -> ValueReport:
    """``F1 * (1 - normalized cost)``, with min-max normalization done per cost kind.

    A pool whose costs are all equal normalizes to 0.
    """
    records = list(records)
    bounds: dict[str, tuple[float, float]] = {}
    for kind in COST_KINDS:
        costs = [r.cost for r in records if r.kind == kind]
        if costs:
            bounds[kind] = (min(costs), max(costs))
    entries = []
    for r in records:
        lo, hi = bounds[r.kind]
        norm = (r.cost - lo) / (hi - lo) if hi > lo else 0.0
        entries.append(ValueEntry(r.config_id, r.kind, r.cost, r.f1, norm, r.f1 * (1.0 - norm)))
    return ValueReport(tuple(entries))


def run_cost(decisions: Sequence, kind: str, rates: tuple[float, float] = (0.0, 0.0)) -> float:
    """Total cost of one run's decisions: USD from token usage, or summed request seconds."""
    if kind == "remote":
        tin = sum(d.input_tokens or 0 for d in decisions)
        tout = sum(d.output_tokens or 0 for d in decisions)
        return monetary_cost(tin, tout, rates)
    if kind == "local":
        return sum(d.duration_s or 0.0 for d in decisions)
    raise ValueError(f"unknown cost kind {kind!r}")


def format_value_table(report: ValueReport) -> str:
    lines = [f"{'config':<28} {'kind':<7} {'cost':>12} {'F1':>7} {'C~':>7} {'V':>7}"]
    for e in report.entries:
        unit = f"${e.cost:.4f}" if e.kind == "remote" else f"{e.cost:.3f}s"
        lines.append(f"{e.config_id:<28} {e.kind:<7} {unit:>12} {e.f1:7.3f} "
                     f"{e.normalized_cost:7.3f} {e.value:7.3f}")
    return "\n".join(lines)


def records_from_mappings(rows: Iterable[Mapping]) -> list[CostRecord]:
    return [CostRecord(str(r["config_id"]), float(r["cost"]), str(r["kind"]), float(r["f1"])) for r in rows]
