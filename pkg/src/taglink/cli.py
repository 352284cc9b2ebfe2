"""Command-line entry point.

Subcommands: ingest, block, link, eval, cost, run, convert.
Exit codes: 0 ok, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .blocker import BLOCKERS, build_scorer
from .candgen import FilterMode, generate, read_candidates, write_candidates
from .convert import convert
from .cost import (
    CostRecord,
    format_value_table,
    records_from_mappings,
    run_cost,
    value,
)
from .evaluate import (
    CLASS_CONVENTION,
    bm25_threshold_baseline,
    end_to_end_metrics,
    multiclass_metrics,
    recall_curve,
    top_misclassified_actors,
    tune_threshold,
)
from .ingest import (
    KINDS,
    dataset_summary,
    dedup,
    events_to_tags,
    exclude_by_address,
    filter_events_by_funds,
    load_events,
    load_tags,
    read_tags,
    sample_events,
    split,
    write_tags,
)
from .kg import KGError, load_registry
from .pipeline import ConfigError, RunConfig, load_config, run_pipeline
from .records import RecordError, read_jsonl, write_json
from .selector import (
    BACKEND_KINDS,
    BackendConfig,
    TemplateConfig,
    build_few_shot_pool,
    make_backend,
    read_decisions,
    select,
    write_decisions,
)

log = logging.getLogger("taglink")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _ratios(text: str) -> list[float]:
    parts = text.replace(",", ":").split(":")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratio list {text!r}") from None


def _ints(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p.strip()]


def _config_defaults(path: str | None) -> RunConfig | None:
    return load_config(path) if path else None


def _registry_paths(args, cfg: RunConfig | None):
    actors = args.actors or (cfg.actors if cfg else None)
    taxonomy = args.taxonomy or (cfg.taxonomy if cfg else None)
    if not actors or not taxonomy:
        raise ConfigError(["--actors and --taxonomy (or --config) are required"])
    return actors, taxonomy


def _emit(args, text: str) -> None:
    if not args.quiet:
        print(text)


def cmd_ingest(args) -> int:
    rejects: list[str] = []
    if args.kind == "event_db" and (args.min_funds is not None or args.sample is not None):
        events = load_events(args.input)
        if args.min_funds is not None:
            events = filter_events_by_funds(events, args.min_funds)
        if args.sample is not None:
            events = sample_events(events, args.sample, args.seed)
        tags = events_to_tags(events, source=args.source or args.kind, rejects=rejects)
    else:
        tags = load_tags(args.input, args.kind, source=args.source, rejects=rejects)
    if args.exclude_addresses:
        known = {t.address for t in read_tags(args.exclude_addresses) if t.address}
        tags = exclude_by_address(tags, known)
    if not args.keep_duplicates:
        tags = dedup(tags)
    out = Path(args.out or "tags.jsonl")
    summary = {"rejected": len(rejects), **dataset_summary(tags)}
    if args.split:
        parts = split(tags, args.split, args.seed)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("train", "validation", "test"):
            write_tags(out / f"{name}.jsonl", parts.part(name))
        summary["split_sizes"] = list(parts.sizes)
    else:
        write_tags(out, tags)
    _emit(args, json.dumps(summary))
    return EXIT_OK


def cmd_block(args) -> int:
    cfg = _config_defaults(args.config)
    registry = load_registry(*_registry_paths(args, cfg))
    tags = read_tags(args.tags)
    params = {"k1": args.k1, "b": args.b} if args.blocker == "bm25_3" else {}
    scorer = build_scorer(registry, args.blocker, **params)
    sets = generate(registry, tags, args.filter, scorer, args.k, strict=args.strict)
    write_candidates(args.out or "candidates.jsonl", sets)
    truth = {t.tag_id: t.actor_link for t in tags}
    if any(truth.values()):
        rows = recall_curve(sets, truth, sorted({k for k in (1, 5, 10, 25) if k <= args.k} | {args.k}))
        _emit(args, "\n".join(f"recall@{r.k} = {r.recall:.3f} ({r.hits}/{r.total})" for r in rows))
    return EXIT_OK


def _backend_config(args, cfg: RunConfig | None) -> BackendConfig:
    base = cfg.backend.to_dict() if cfg else {}
    overrides = {
        "kind": args.backend, "endpoint": args.endpoint, "model": args.model,
        "max_parallel": args.concurrency, "mock_mode": args.mock_mode,
        "mock_fixture": args.mock_fixture, "credential_env": args.credential_env,
        "price_in": args.price_in, "price_out": args.price_out,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    conf = BackendConfig.from_dict(base)
    problems = conf.violations()
    if problems:
        raise ConfigError(problems)
    return conf


def cmd_link(args) -> int:
    cfg = _config_defaults(args.config)
    registry = load_registry(*_registry_paths(args, cfg))
    tags = read_tags(args.tags)
    cands = {cs.tag_id: cs for cs in read_candidates(args.candidates)}
    missing = [t.tag_id for t in tags if t.tag_id not in cands]
    if missing:
        raise ConfigError([f"{len(missing)} tag(s) lack a candidate set, e.g. {missing[0]!r}"])
    template = args.template if args.template is not None else (cfg.template if cfg else 9)
    shots = args.shots if args.shots is not None else (cfg.shots if cfg else 0)
    try:
        tconf = TemplateConfig(template, shots)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
    examples = []
    if shots:
        if not args.train:
            raise ConfigError(["--train is required when --shots > 0"])
        scorer = build_scorer(registry, "bm25_3")
        k = max(len(cs) for cs in cands.values()) if cands else 5
        examples = build_few_shot_pool(read_tags(args.train), registry, scorer, k, args.seed, shots)
    bconf = _backend_config(args, cfg)
    truth = {t.tag_id: t.actor_link for t in tags}
    backend = make_backend(bconf, truth=truth)
    try:
        decisions = select([(t, cands[t.tag_id]) for t in tags], tconf, backend, registry, examples)
    finally:
        if hasattr(backend, "close"):
            backend.close()
    write_decisions(args.out or "decisions.jsonl", decisions)
    failed = sum(d.failed for d in decisions)
    invalid = sum(not d.valid_response and not d.failed for d in decisions)
    _emit(args, f"{len(decisions)} decisions, {invalid} invalid, {failed} failed")
    if failed:
        log.warning("%d request(s) failed and were counted as no-match", failed)
    return EXIT_OK


def cmd_eval(args) -> int:
    tags = read_tags(args.tags)
    truth = {t.tag_id: t.actor_link for t in tags}
    cands = read_candidates(args.candidates)
    report = {
        "class_convention": CLASS_CONVENTION,
        "recall": [r.to_dict() for r in recall_curve(cands, truth, args.ks)],
        "systems": {},
    }
    systems = {}
    if args.decisions:
        systems["selector"] = read_decisions(args.decisions)
    threshold = args.baseline_threshold
    if args.tune_threshold:
        threshold = tune_threshold(cands, truth)
    if threshold is not None:
        report["baseline_threshold"] = threshold
        systems["bm25_3-threshold"] = bm25_threshold_baseline(cands, threshold)
    lines = [f"# classes: {CLASS_CONVENTION}"]
    lines += [f"recall@{r['k']} = {r['recall']:.3f} ({r['hits']}/{r['total']})" for r in report["recall"]]
    for name, decs in systems.items():
        sel = multiclass_metrics(decs, truth)
        e2e, errors = end_to_end_metrics(cands, decs, truth)
        top = top_misclassified_actors(errors, args.errors)
        report["systems"][name] = {
            "metrics": sel.to_dict(with_classes=args.per_class),
            "errors": errors.to_dict(),
            "top_misclassified": [list(r) for r in top],
        }
        lines.append(
            f"{name}: acc={e2e.accuracy:.3f} P={e2e.macro_precision:.3f} R={e2e.macro_recall:.3f} "
            f"F1={e2e.macro_f1:.3f} missed={errors.missed_entity} wrong={errors.wrong_entity}"
        )
        lines += [f"    {a}: {m}/{t}" for a, m, t in top]
    if args.out:
        write_json(args.out, report)
    _emit(args, "\n".join(lines))
    return EXIT_OK


def _record_from_run(run_dir: Path, rates: tuple[float, float] | None) -> CostRecord:
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    report = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    conf = manifest["config"]
    backend = BackendConfig.from_dict(conf["backend"])
    rates = rates or (backend.price_in, backend.price_out)
    decisions = read_decisions(run_dir / "decisions.jsonl")
    f1 = report["systems"][f"llm:{backend.model}"]["metrics"]["macro_f1"]
    cfg_id = f"{backend.model}:{conf['template']}/{conf['shots']}"
    return CostRecord(cfg_id, run_cost(decisions, backend.cost_kind, rates), backend.cost_kind, f1)


def cmd_cost(args) -> int:
    records = []
    rates = tuple(args.rates) if args.rates else None
    for run_dir in args.run or []:
        records.append(_record_from_run(Path(run_dir), rates))
    if args.records:
        records.extend(records_from_mappings(read_jsonl(args.records)))
    if not records:
        raise ConfigError(["give --run directories and/or a --records file"])
    report = value(records)
    if args.out:
        write_json(args.out, report.to_dict())
    _emit(args, format_value_table(report))
    return EXIT_OK


def cmd_run(args) -> int:
    if not args.config:
        raise ConfigError(["run needs --config"])
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    result = run_pipeline(config, args.out)
    if result.status == EXIT_CONFIG:
        for v in result.manifest.get("violations", []):
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    if result.status == EXIT_OK and result.report is not None:
        _emit(args, (result.out_dir / "report.txt").read_text(encoding="utf-8").rstrip())
    elif result.status:
        print(f"run failed at stage {result.manifest.get('failed_stage')}; "
              f"see {result.out_dir / 'manifest.json'}", file=sys.stderr)
    return result.status


def cmd_convert(args) -> int:
    n = convert(args.what, args.source, args.out)
    _emit(args, f"wrote {n} record(s) to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config (YAML/JSON) supplying defaults")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--quiet", action="store_true", help="suppress stdout summaries")

    registry = argparse.ArgumentParser(add_help=False)
    registry.add_argument("--actors", help="actors JSONL")
    registry.add_argument("--taxonomy", help="taxonomy JSONL")

    p = argparse.ArgumentParser(
        prog="taglink",
        description="Link cryptoasset attribution tags to knowledge-graph actors and evaluate the result.",
        epilog="Exit codes: 0 ok, 1 runtime failure, 2 configuration error.",
    )
    p.add_argument("--version", action="version", version=f"taglink {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="normalize, dedup and split a tag dataset")
    s.add_argument("--input", required=True)
    s.add_argument("--kind", choices=KINDS, required=True)
    s.add_argument("--source", help="dataset name used in tag ids")
    s.add_argument("--split", type=_ratios, help="train:validation:test ratios, e.g. 1:30:69")
    s.add_argument("--exclude-addresses", help="tags file whose addresses are excluded")
    s.add_argument("--min-funds", type=float, help="event_db: keep events with funds above this (USD)")
    s.add_argument("--sample", type=int, help="event_db: seeded sample size")
    s.add_argument("--keep-duplicates", action="store_true")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("block", parents=[common, registry], help="generate candidate sets")
    s.add_argument("--tags", required=True)
    s.add_argument("--blocker", choices=BLOCKERS, default="bm25_3")
    s.add_argument("--filter", choices=[m.value for m in FilterMode], default="related_concept")
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--k1", type=float, default=1.5)
    s.add_argument("--b", type=float, default=0.75)
    s.add_argument("--strict", action="store_true", help="fail on tag categories missing from the taxonomy")
    s.set_defaults(func=cmd_block)

    s = sub.add_parser("link", parents=[common, registry], help="select candidates with an LLM backend")
    s.add_argument("--tags", required=True)
    s.add_argument("--candidates", required=True)
    s.add_argument("--template", type=int)
    s.add_argument("--shots", type=int)
    s.add_argument("--train", help="training tags for few-shot examples")
    s.add_argument("--backend", choices=BACKEND_KINDS)
    s.add_argument("--endpoint")
    s.add_argument("--model")
    s.add_argument("--concurrency", type=int)
    s.add_argument("--credential-env", help="environment variable holding the API key")
    s.add_argument("--price-in", type=float, help="USD per 1M input tokens")
    s.add_argument("--price-out", type=float, help="USD per 1M output tokens")
    s.add_argument("--mock-mode", choices=("oracle", "zero", "fixture"))
    s.add_argument("--mock-fixture", help="recorded responses JSONL for the fixture mock")
    s.set_defaults(func=cmd_link)

    s = sub.add_parser("eval", parents=[common], help="score candidates and decisions")
    s.add_argument("--tags", required=True, help="tags file with ground-truth actor links")
    s.add_argument("--candidates", required=True)
    s.add_argument("--decisions")
    s.add_argument("--baseline-threshold", type=float)
    s.add_argument("--tune-threshold", action="store_true")
    s.add_argument("--ks", type=_ints, default=[1, 5, 10, 25])
    s.add_argument("--errors", type=int, default=3, help="top misclassified actors to list")
    s.add_argument("--per-class", action="store_true", help="include per-class counts in the report")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("cost", parents=[common], help="cost-weighted value of configurations")
    s.add_argument("--run", action="append", help="run directory (repeatable)")
    s.add_argument("--records", help="JSONL of {config_id, cost, kind, f1}")
    s.add_argument("--rates", type=_ratios, help="override USD per 1M in:out tokens")
    s.set_defaults(func=cmd_cost)

    s = sub.add_parser("run", parents=[common], help="run the whole pipeline from a config")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("convert", parents=[common], help="convert public GraphSense files")
    s.add_argument("what", choices=("actors", "taxonomy", "tagpacks"))
    s.add_argument("source")
    s.set_defaults(func=cmd_convert)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "run" and args.seed is None:
        args.seed = 0
    if args.command == "convert" and not args.out:
        parser.error("convert needs --out")
    try:
        return args.func(args)
    except (ConfigError, KGError) as exc:
        for problem in getattr(exc, "violations", None) or getattr(exc, "problems", None) or [str(exc)]:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (RecordError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
