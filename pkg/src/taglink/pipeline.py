"""End-to-end runs: ingest, candidate generation, selection, evaluation, cost."""

from __future__ import annotations

import hashlib
import logging
import platform
import traceback
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import __version__
from .blocker import BLOCKERS, build_scorer
from .candgen import FilterMode, FilterStats, generate, write_candidates
from .cost import CostRecord, run_cost, value
from .evaluate import (
    CLASS_CONVENTION,
    bm25_threshold_baseline,
    decision_stats,
    end_to_end_metrics,
    recall_curve,
    top_misclassified_actors,
    tune_threshold,
)
from .ingest import (
    KINDS,
    AttributionTag,
    dataset_summary,
    dedup,
    events_to_tags,
    filter_events_by_funds,
    load_events,
    load_tags,
    sample_events,
    split,
    write_tags,
)
from .kg import ActorRegistry, load_registry
from .records import write_json
from .selector import (
    BackendConfig,
    TemplateConfig,
    build_few_shot_pool,
    make_backend,
    select,
    write_decisions,
    write_examples,
)

log = logging.getLogger(__name__)

SPLIT_PARTS = ("train", "validation", "test")


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class DatasetConfig:
    name: str
    path: str
    kind: str = "tagpack"
    split_ratios: list[float] | None = None
    part: str = "test"
    min_funds_usd: float | None = None
    sample: int | None = None


@dataclass
class RunConfig:
    actors: str
    taxonomy: str
    datasets: list[DatasetConfig]
    filter: str = "related_concept"
    blocker: str = "bm25_3"
    k: int = 5
    k1: float = 1.5
    b: float = 0.75
    recall_ks: list[int] = field(default_factory=lambda: [1, 5, 10, 25])
    template: int = 9
    shots: int = 0
    backend: BackendConfig = field(default_factory=BackendConfig)
    baseline_threshold: float | str | None = None
    top_errors: int = 3
    seed: int = 0
    out: str | None = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | Path | None = None) -> "RunConfig":
        data = dict(data)
        base = Path(base_dir).resolve() if base_dir else None

        def resolve(p):
            if p is None:
                return None
            p = Path(p)
            return str(p if p.is_absolute() or base is None else base / p)

        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"unknown config key(s): {', '.join(unknown)}"])
        missing = [k for k in ("actors", "taxonomy", "datasets") if k not in data]
        if missing:
            raise ConfigError([f"missing config key {k!r}" for k in missing])
        try:
            datasets = [DatasetConfig(**ds) for ds in data.pop("datasets") or []]
            backend = BackendConfig.from_dict(data.pop("backend", None) or {})
        except (TypeError, ValueError) as exc:
            raise ConfigError([str(exc)]) from None
        for ds in datasets:
            ds.path = resolve(ds.path)
        if backend.mock_fixture:
            backend.mock_fixture = resolve(backend.mock_fixture)
        data["actors"] = resolve(data["actors"])
        data["taxonomy"] = resolve(data["taxonomy"])
        return cls(datasets=datasets, backend=backend, **data)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML/JSON run config, or the ``config`` block of a run manifest."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: config must be a mapping"])
    if "config" in data and "stages" in data:
        return RunConfig.from_dict(data["config"])
    return RunConfig.from_dict(data, base_dir=path.parent)


def validate_config(config: RunConfig) -> list[str]:
    """Every violated run invariant; an empty list means the config is usable."""
    v = []
    for label, p in (("actors file", config.actors), ("taxonomy file", config.taxonomy)):
        if not p or not Path(p).is_file():
            v.append(f"{label} not found: {p}")
    if not config.datasets:
        v.append("at least one dataset is required")
    names = [ds.name for ds in config.datasets]
    if len(set(names)) != len(names):
        v.append("dataset names must be unique")
    for ds in config.datasets:
        if not ds.path or not Path(ds.path).is_file():
            v.append(f"dataset {ds.name!r}: file not found: {ds.path}")
        if ds.kind not in KINDS:
            v.append(f"dataset {ds.name!r}: kind must be one of {KINDS}")
        if ds.split_ratios is not None:
            r = ds.split_ratios
            if len(r) != 3 or any(x < 0 for x in r) or sum(r) <= 0:
                v.append(f"dataset {ds.name!r}: split_ratios must be three non-negative numbers with positive sum")
            if ds.part not in SPLIT_PARTS:
                v.append(f"dataset {ds.name!r}: part must be one of {SPLIT_PARTS}")
        if ds.min_funds_usd is not None and ds.min_funds_usd < 0:
            v.append(f"dataset {ds.name!r}: min_funds_usd must be >= 0")
        if ds.sample is not None and ds.sample < 1:
            v.append(f"dataset {ds.name!r}: sample must be >= 1")
    if config.k < 1:
        v.append("k ≥ 1 required")
    if any(k < 1 for k in config.recall_ks):
        v.append("recall_ks must all be >= 1")
    if config.template not in range(10):
        v.append("template id must be in 0-9")
    if config.shots < 0:
        v.append("shots must be >= 0")
    if config.shots > 0 and not any(ds.split_ratios for ds in config.datasets):
        v.append("few-shot prompts need a dataset with split_ratios to draw training tags from")
    if config.filter not in {m.value for m in FilterMode}:
        v.append(f"filter must be one of {[m.value for m in FilterMode]}")
    if config.blocker not in BLOCKERS:
        v.append(f"blocker must be one of {BLOCKERS}")
    if config.k1 <= 0 or not 0 <= config.b <= 1:
        v.append("BM25 parameters need k1 > 0 and 0 <= b <= 1")
    bt = config.baseline_threshold
    if isinstance(bt, str) and bt != "tune":
        v.append("baseline_threshold must be a number, 'tune' or null")
    if bt is not None and config.blocker != "bm25_3":
        v.append("the threshold baseline needs the bm25_3 blocker")
    v.extend(f"backend: {msg}" for msg in config.backend.violations())
    return v


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_dataset(ds: DatasetConfig, seed: int) -> tuple[list[AttributionTag], list[AttributionTag], dict]:
    """Evaluated tags, training tags, and a summary for one configured dataset."""
    rejects: list[str] = []
    if ds.kind == "event_db" and (ds.min_funds_usd is not None or ds.sample is not None):
        events = load_events(ds.path)
        if ds.min_funds_usd is not None:
            events = filter_events_by_funds(events, ds.min_funds_usd)
        if ds.sample is not None:
            events = sample_events(events, ds.sample, seed)
        tags = events_to_tags(events, source=ds.name, rejects=rejects)
    else:
        tags = load_tags(ds.path, ds.kind, source=ds.name, rejects=rejects)
    loaded = len(tags)
    tags = dedup(tags)
    summary = {"name": ds.name, "kind": ds.kind, "loaded": loaded, "rejected": len(rejects),
               "after_dedup": len(tags)}
    train: list[AttributionTag] = []
    if ds.split_ratios is not None:
        parts = split(tags, ds.split_ratios, seed)
        summary["split_sizes"] = list(parts.sizes)
        summary["part"] = ds.part
        train = parts.train
        tags = parts.part(ds.part)
    summary.update(dataset_summary(tags))
    return tags, train, summary


def _check_links(tags, registry: ActorRegistry) -> None:
    unknown = sorted({t.actor_link for t in tags if t.actor_link and t.actor_link not in registry})
    if unknown:
        shown = ", ".join(unknown[:5])
        raise ValueError(f"{len(unknown)} ground-truth actor(s) not in the registry: {shown}")


def format_report(report: dict) -> str:
    lines = [f"# {report['title']}", f"# classes: {report['class_convention']}", ""]
    lines.append("candidate recall")
    for row in report["recall"]:
        lines.append(f"  k={row['k']:<3} recall={row['recall']:.3f} ({row['hits']}/{row['total']})")
    lines.append("")
    header = f"{'system':<22} {'n':>6} {'acc':>7} {'P':>7} {'R':>7} {'F1':>7} {'missed':>7} {'wrong':>7}"
    lines.append(header)
    for name, row in report["systems"].items():
        m, e = row["metrics"], row["errors"]
        lines.append(
            f"{name:<22} {m['n']:>6} {m['accuracy']:7.3f} {m['macro_precision']:7.3f} "
            f"{m['macro_recall']:7.3f} {m['macro_f1']:7.3f} {e['missed_entity']:>7} {e['wrong_entity']:>7}"
        )
        for actor, miss, total in row.get("top_misclassified", []):
            lines.append(f"    {actor:<30} {miss:>5} / {total}")
    return "\n".join(lines) + "\n"


def evaluate_run(tags, cands_full, cands, decisions, truth, config: RunConfig):
    """The report dict for one run: recall series, selector metrics, optional baseline."""
    report = {
        "title": f"{config.blocker} / {config.filter} / k={config.k} / template {config.template}/{config.shots}",
        "class_convention": CLASS_CONVENTION,
        "recall": [r.to_dict() for r in recall_curve(cands_full, truth, sorted(set(config.recall_ks) | {config.k}))],
        "decisions": decision_stats(decisions),
        "systems": {},
    }

    def add(name, decs):
        metrics, errors = end_to_end_metrics(cands, decs, truth)
        report["systems"][name] = {
            "metrics": metrics.to_dict(with_classes=False),
            "errors": errors.to_dict(),
            "top_misclassified": [list(r) for r in top_misclassified_actors(errors, config.top_errors)],
        }
        by_source = {}
        for src in sorted({t.source for t in tags}):
            ids = {t.tag_id for t in tags if t.source == src}
            sub = [d for d in decs if d.tag_id in ids]
            m, e = end_to_end_metrics(cands, sub, truth)
            by_source[src] = {"metrics": m.to_dict(with_classes=False), "errors": e.to_dict()}
        report["systems"][name]["by_source"] = by_source
        return metrics

    selector = add(f"llm:{config.backend.model}", decisions)
    if config.baseline_threshold is not None:
        threshold = config.baseline_threshold
        if threshold == "tune":
            threshold = tune_threshold(cands, truth)
        report["baseline_threshold"] = float(threshold)
        add("bm25_3-threshold", bm25_threshold_baseline(cands, float(threshold)))
    return report, selector


@dataclass
class RunResult:
    status: int
    out_dir: Path
    manifest: dict
    report: dict | None = None


def run_pipeline(config: RunConfig, out_dir: str | Path | None = None) -> RunResult:
    """Run every stage, writing artifacts and ``manifest.json`` under ``out_dir``.

    Exit status is 0 on success, 2 for an invalid config (nothing is run) and
    1 when a stage fails; partial artifacts are kept and the manifest names
    the failed stage.
    """
    out = Path(out_dir or config.out or "run")
    manifest: dict[str, Any] = {
        "tool": "taglink",
        "version": __version__,
        "python": platform.python_version(),
        "seed": config.seed,
        "config": config.to_dict(),
        "stages": {},
        "artifacts": {},
        "status": "running",
    }
    violations = validate_config(config)
    if violations:
        manifest["status"] = "config_error"
        manifest["violations"] = violations
        return RunResult(2, out, manifest)

    out.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}
    stage = "ingest"
    report = None
    try:
        registry = load_registry(config.actors, config.taxonomy)
        tags: list[AttributionTag] = []
        train: list[AttributionTag] = []
        summaries = []
        for ds in config.datasets:
            ds_tags, ds_train, summary = _load_dataset(ds, config.seed)
            tags.extend(ds_tags)
            if not train:
                train = ds_train
            summaries.append(summary)
        _check_links(tags, registry)
        write_tags(out / "tags.jsonl", tags)
        artifacts["tags"] = out / "tags.jsonl"
        if train:
            write_tags(out / "train.jsonl", train)
            artifacts["train"] = out / "train.jsonl"
        manifest["stages"]["ingest"] = {"status": "ok", "datasets": summaries, "actors": len(registry)}

        stage = "block"
        params = {"k1": config.k1, "b": config.b} if config.blocker == "bm25_3" else {}
        scorer = build_scorer(registry, config.blocker, **params)
        depth = max([config.k, *config.recall_ks])
        stats = FilterStats()
        cands_full = generate(registry, tags, config.filter, scorer, depth, stats=stats)
        cands = [cs.prefix(config.k) for cs in cands_full]
        write_candidates(out / "candidates.jsonl", cands)
        artifacts["candidates"] = out / "candidates.jsonl"
        manifest["stages"]["block"] = {"status": "ok", "filter_fallbacks": asdict(stats)}

        stage = "link"
        truth = {t.tag_id: t.actor_link for t in tags}
        tconf = TemplateConfig(config.template, config.shots)
        examples = []
        if config.shots:
            examples = build_few_shot_pool(train, registry, scorer, config.k, config.seed, config.shots)
            write_examples(out / "examples.jsonl", examples)
            artifacts["examples"] = out / "examples.jsonl"
        backend = make_backend(config.backend, truth=truth)
        try:
            decisions = select(list(zip(tags, cands)), tconf, backend, registry, examples)
        finally:
            close = getattr(backend, "close", None)
            if close:
                close()
        write_decisions(out / "decisions.jsonl", decisions)
        artifacts["decisions"] = out / "decisions.jsonl"
        manifest["stages"]["link"] = {"status": "ok", **decision_stats(decisions)}

        stage = "eval"
        report, selector_metrics = evaluate_run(tags, cands_full, cands, decisions, truth, config)
        write_json(out / "report.json", report)
        (out / "report.txt").write_text(format_report(report), encoding="utf-8")
        artifacts["report"] = out / "report.json"
        artifacts["report_text"] = out / "report.txt"
        manifest["stages"]["eval"] = {"status": "ok"}

        stage = "cost"
        kind = config.backend.cost_kind
        rates = (config.backend.price_in, config.backend.price_out)
        record = CostRecord(f"{config.backend.model}:{tconf.label}", run_cost(decisions, kind, rates),
                            kind, selector_metrics.macro_f1)
        write_json(out / "cost.json", {"records": [record.to_dict()], **value([record]).to_dict()})
        artifacts["cost"] = out / "cost.json"
        manifest["stages"]["cost"] = {"status": "ok"}
        manifest["status"] = "ok"
        status = 0
    except Exception as exc:  # noqa: BLE001 - any stage failure is recorded, not raised
        log.error("stage %s failed: %s", stage, exc)
        manifest["stages"][stage] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        log.debug("%s", traceback.format_exc())
        status = 1
    manifest["artifacts"] = {name: {"path": p.name, "sha256": _sha256(p)}
                             for name, p in artifacts.items() if p.exists()}
    write_json(out / "manifest.json", manifest)
    return RunResult(status, out, manifest, report)
