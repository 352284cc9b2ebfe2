"""Loading, normalizing, deduplicating and splitting attribution-tag datasets."""

from __future__ import annotations

import csv
import logging
import random
import re
import unicodedata
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import yaml

from .records import RecordError, iter_jsonl, write_jsonl

log = logging.getLogger(__name__)

KINDS = ("tagpack", "watchyourback", "event_db")

_WS = re.compile(r"\s+")


def normalize_label(text: str) -> str:
    """NFC, trimmed, internal whitespace runs collapsed. Case is preserved."""
    return _WS.sub(" ", unicodedata.normalize("NFC", text)).strip()


@dataclass(frozen=True)
class AttributionTag:
    tag_id: str
    label: str
    source: str
    address: str | None = None
    category: str | None = None
    actor_link: str | None = None

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "AttributionTag":
        return cls(
            tag_id=str(rec["tag_id"]),
            label=str(rec["label"]),
            source=str(rec.get("source") or ""),
            address=rec.get("address") or None,
            category=rec.get("category") or None,
            actor_link=rec.get("actor_link") or None,
        )


@dataclass
class DatasetSplit:
    train: list[AttributionTag]
    validation: list[AttributionTag]
    test: list[AttributionTag]

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def part(self, name: str) -> list[AttributionTag]:
        if name not in ("train", "validation", "test"):
            raise ValueError(f"unknown split part {name!r}")
        return getattr(self, name)


def _opt(value) -> str | None:
    if value is None:
        return None
    value = str(value).strip()
    return value or None


def _make_tag(source: str, locator: int, label, address=None, category=None, actor=None,
              rejects: list | None = None) -> AttributionTag | None:
    label = normalize_label(str(label)) if label is not None else ""
    if not label:
        if rejects is not None:
            rejects.append(f"{source}:{locator}: empty label")
        return None
    return AttributionTag(
        tag_id=f"{source}-{locator:06d}",
        label=label,
        source=source,
        address=_opt(address),
        category=_opt(category),
        actor_link=_opt(actor),
    )


def _tagpack_yaml_records(path: Path) -> Iterator[tuple[int, dict]]:
    """Flatten a GraphSense TagPack: tags inherit header-level fields."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise RecordError(path, (mark.line + 1) if mark else 0, "invalid YAML") from None
    if not isinstance(doc, dict):
        raise RecordError(path, 1, "TagPack must be a mapping")
    tags = doc.get("tags") or []
    header = {k: v for k, v in doc.items() if k != "tags"}
    for i, tag in enumerate(tags, start=1):
        if not isinstance(tag, dict):
            raise RecordError(path, i, "tag entry must be a mapping")
        yield i, {**header, **tag}


def _read_tabular(path: Path) -> Iterator[tuple[int, dict]]:
    if path.suffix.lower() in (".csv", ".tsv"):
        delim = "\t" if path.suffix.lower() == ".tsv" else ","
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh, delimiter=delim)
            for row in reader:
                if None in row:
                    raise RecordError(path, reader.line_num, "more fields than header columns")
                yield reader.line_num, row
    else:
        yield from iter_jsonl(path)


def _require(path, lineno, rec: dict, key: str):
    if key not in rec:
        raise RecordError(path, lineno, f"missing field {key!r}")
    return rec[key]


def load_tags(path: str | Path, kind: str, *, source: str | None = None,
              rejects: list[str] | None = None) -> list[AttributionTag]:
    """Read one dataset file into normalized tags.

    ``tagpack`` accepts TagPack YAML or JSONL; ``watchyourback`` CSV/TSV or
    JSONL; ``event_db`` JSONL or CSV, with the event title used as the label.
    Records whose label is empty after normalization are skipped and, when
    ``rejects`` is given, a locator string is appended to it.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    path = Path(path)
    source = source or kind
    if path.stat().st_size == 0:
        return []

    if kind == "tagpack" and path.suffix.lower() in (".yaml", ".yml"):
        records = _tagpack_yaml_records(path)
    else:
        records = _read_tabular(path)

    local_rejects: list[str] = []
    tags = []
    for lineno, rec in records:
        if kind == "event_db":
            tag = _make_tag(source, lineno, _require(path, lineno, rec, "title"),
                            actor=rec.get("actor"), rejects=local_rejects)
        else:
            tag = _make_tag(source, lineno, _require(path, lineno, rec, "label"),
                            address=rec.get("address"), category=rec.get("category"),
                            actor=rec.get("actor"), rejects=local_rejects)
        if tag is not None:
            tags.append(tag)
    if local_rejects:
        log.warning("%s: rejected %d record(s) with empty labels", path, len(local_rejects))
        if rejects is not None:
            rejects.extend(local_rejects)
    return tags


def write_tags(path: str | Path, tags: Iterable[AttributionTag]) -> int:
    return write_jsonl(path, (t.to_record() for t in tags))


def read_tags(path: str | Path) -> list[AttributionTag]:
    """Read a canonical tags file written by :func:`write_tags`."""
    return [AttributionTag.from_record(rec) for _, rec in iter_jsonl(path)]


def dedup(tags: Iterable[AttributionTag]) -> list[AttributionTag]:
    """Keep the first tag per (case-folded label, actor link)."""
    seen = set()
    out = []
    for t in tags:
        key = (t.label.casefold(), t.actor_link)
        if key not in seen:
            seen.add(key)
            out.append(t)
    return out


def exclude_by_address(tags: Iterable[AttributionTag], known_addresses) -> list[AttributionTag]:
    known = set(known_addresses)
    return [t for t in tags if t.address is None or t.address not in known]


def load_events(path: str | Path) -> list[dict]:
    path = Path(path)
    if path.stat().st_size == 0:
        return []
    return [{**rec, "_line": lineno} for lineno, rec in _read_tabular(path)]


def _funds(event: dict) -> float | None:
    value = event.get("funds_usd")
    if value in (None, ""):
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def filter_events_by_funds(events: Iterable[dict], threshold_usd: float) -> list[dict]:
    """Events whose loss strictly exceeds the threshold; missing amounts are dropped."""
    if threshold_usd < 0:
        raise ValueError("threshold must be non-negative")
    return [e for e in events if (f := _funds(e)) is not None and f > threshold_usd]


def sample_events(events: Sequence[dict], n: int, seed: int) -> list[dict]:
    """Seeded sample without replacement, returned in original order."""
    if n >= len(events):
        return list(events)
    picked = sorted(random.Random(seed).sample(range(len(events)), n))
    return [events[i] for i in picked]


def events_to_tags(events: Iterable[dict], source: str = "event_db",
                   rejects: list[str] | None = None) -> list[AttributionTag]:
    tags = []
    for i, ev in enumerate(events, start=1):
        tag = _make_tag(source, int(ev.get("_line", i)), ev.get("title"),
                        actor=ev.get("actor"), rejects=rejects)
        if tag is not None:
            tags.append(tag)
    return tags


def split(tags: Sequence[AttributionTag], ratios=(1, 30, 69), seed: int = 0) -> DatasetSplit:
    """Seeded shuffle, then floor-allocated train/validation slices; the rest is test.

    Each part keeps the input order of its members.
    """
    if len(ratios) != 3:
        raise ValueError("ratios must have three entries")
    fr = [Fraction(str(r)) for r in ratios]
    if any(r < 0 for r in fr) or sum(fr) <= 0:
        raise ValueError("ratios must be non-negative with a positive sum")
    tags = list(tags)
    n = len(tags)
    if n < 3:
        return DatasetSplit([], [], tags)
    total = sum(fr)
    n_train = int(n * fr[0] / total)
    n_val = int(n * fr[1] / total)
    order = list(range(n))
    random.Random(seed).shuffle(order)
    train_idx = sorted(order[:n_train])
    val_idx = sorted(order[n_train:n_train + n_val])
    test_idx = sorted(order[n_train + n_val:])
    return DatasetSplit(
        [tags[i] for i in train_idx],
        [tags[i] for i in val_idx],
        [tags[i] for i in test_idx],
    )


def dataset_summary(tags: Sequence[AttributionTag]) -> dict:
    linked = [t.actor_link for t in tags if t.actor_link]
    return {"samples": len(tags), "actor_links": len(linked), "distinct_actors": len(set(linked))}
