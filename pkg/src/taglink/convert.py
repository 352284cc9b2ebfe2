"""Converters from the public GraphSense files to the canonical JSONL inputs.

* ActorPack YAML (``actors.yaml``)            -> actors JSONL
* concepts taxonomy YAML (``concepts.yaml``)  -> taxonomy JSONL
* a directory of TagPack YAML files          -> tagpack-kind tags JSONL
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import yaml

from .records import write_jsonl


def _load_yaml(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        return yaml.safe_load(fh)


def actorpack_records(path: str | Path) -> Iterator[dict]:
    doc = _load_yaml(path) or {}
    for actor in doc.get("actors") or []:
        juris = actor.get("jurisdictions")
        if isinstance(juris, list):
            juris = ",".join(str(j) for j in juris) or None
        cats = actor.get("categories") or []
        yield {
            "id": str(actor["id"]).strip(),
            "label": str(actor.get("label") or "").strip(),
            "categories": [cats] if isinstance(cats, str) else list(cats),
            "uri": actor.get("uri"),
            "jurisdiction": juris,
        }


def concept_records(path: str | Path) -> Iterator[dict]:
    doc = _load_yaml(path) or {}
    entries = {k: v for k, v in doc.items() if isinstance(v, dict) and v.get("type") == "concept"}
    # The concept's own ``id`` wins over its mapping key; ``broader`` may name either.
    key_to_id = {k: str(v.get("id", k)).strip() for k, v in entries.items()}
    for key, entry in entries.items():
        parent = entry.get("broader")
        yield {
            "id": key_to_id[key],
            "label": entry.get("prefLabel") or entry.get("label") or key,
            "parent": key_to_id.get(parent, parent),
        }


def tagpack_records(root: str | Path, *, linked_only: bool = True) -> Iterator[dict]:
    """Flatten every TagPack under ``root``; tags inherit header fields."""
    root = Path(root)
    files = [root] if root.is_file() else sorted(p for p in root.rglob("*.y*ml") if p.is_file())
    for path in files:
        doc = _load_yaml(path)
        if not isinstance(doc, dict) or "tags" not in doc:
            continue
        header = {k: v for k, v in doc.items() if k != "tags"}
        for tag in doc.get("tags") or []:
            rec = {**header, **tag}
            if linked_only and not rec.get("actor"):
                continue
            yield {
                "label": rec.get("label"),
                "address": rec.get("address"),
                "category": rec.get("category"),
                "actor": rec.get("actor"),
            }


def convert(what: str, source: str | Path, out: str | Path, **kwargs) -> int:
    readers = {"actors": actorpack_records, "taxonomy": concept_records, "tagpacks": tagpack_records}
    if what not in readers:
        raise ValueError(f"unknown conversion {what!r}; expected one of {sorted(readers)}")
    return write_jsonl(out, readers[what](source, **kwargs))
