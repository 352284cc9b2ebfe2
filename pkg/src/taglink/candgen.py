"""Candidate-set generation: taxonomy filtering composed with trigram blocking."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .blocker import ScoredCandidate, Scorer, top_k
from .ingest import AttributionTag
from .kg import ActorRegistry
from .records import iter_jsonl, write_jsonl

log = logging.getLogger(__name__)


class FilterMode(str, enum.Enum):
    NONE = "none"
    SAME_CONCEPT = "same_concept"
    RELATED_CONCEPT = "related_concept"


class UnknownCategoryError(KeyError):
    pass


@dataclass
class FilterStats:
    """Tags that fell back to unfiltered ranking under a filtering mode."""

    missing_category: int = 0
    unknown_category: int = 0


@dataclass(frozen=True)
class CandidateSet:
    tag_id: str
    candidates: tuple[ScoredCandidate, ...]
    filter_mode: FilterMode = FilterMode.NONE
    blocker: str = "bm25_3"

    @property
    def actor_ids(self) -> list[str]:
        return [c.actor_id for c in self.candidates]

    def __len__(self) -> int:
        return len(self.candidates)

    def prefix(self, k: int) -> "CandidateSet":
        return CandidateSet(self.tag_id, self.candidates[:k], self.filter_mode, self.blocker)

    def to_record(self) -> dict:
        return {
            "tag_id": self.tag_id,
            "filter_mode": self.filter_mode.value,
            "blocker": self.blocker,
            "candidates": [{"actor_id": c.actor_id, "score": c.score} for c in self.candidates],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CandidateSet":
        return cls(
            tag_id=str(rec["tag_id"]),
            candidates=tuple(ScoredCandidate(c["actor_id"], float(c["score"])) for c in rec["candidates"]),
            filter_mode=FilterMode(rec.get("filter_mode", "none")),
            blocker=rec.get("blocker", "bm25_3"),
        )


def filter_actors(registry: ActorRegistry, tag: AttributionTag, mode: FilterMode | str,
                  *, strict: bool = False, stats: FilterStats | None = None) -> set[str]:
    """Actor ids compatible with the tag's category under ``mode``.

    A tag without a category, or with one the taxonomy does not know (unless
    ``strict``), is not filtered.
    """
    mode = FilterMode(mode)
    everyone = set(registry.actors)
    if mode is FilterMode.NONE:
        return everyone
    if tag.category is None:
        if stats is not None:
            stats.missing_category += 1
        return everyone
    if tag.category not in registry.taxonomy:
        if strict:
            raise UnknownCategoryError(f"tag {tag.tag_id!r} has unknown category {tag.category!r}")
        if stats is not None:
            stats.unknown_category += 1
        return everyone
    if mode is FilterMode.SAME_CONCEPT:
        wanted = {tag.category}
    else:
        wanted = registry.taxonomy.related_concepts(tag.category)
    return {a.id for a in registry if a.concepts & wanted}


def generate(registry: ActorRegistry, tags: Iterable[AttributionTag], mode: FilterMode | str,
             scorer: Scorer, k: int, *, strict: bool = False,
             stats: FilterStats | None = None) -> list[CandidateSet]:
    """One candidate set per tag, in input order.

    Filtering masks the full-corpus ranking, so corpus statistics are shared
    across all tags regardless of their category.
    """
    mode = FilterMode(mode)
    stats = stats if stats is not None else FilterStats()
    everyone_size = len(registry)
    out = []
    for tag in tags:
        allowed = filter_actors(registry, tag, mode, strict=strict, stats=stats)
        mask = None if len(allowed) == everyone_size else allowed
        cands = top_k(scorer, tag.label, k, allowed=mask)
        out.append(CandidateSet(tag.tag_id, tuple(cands), mode, scorer.name))
    if stats.missing_category or stats.unknown_category:
        log.info("filtering skipped for %d tag(s) without category and %d with unknown category",
                 stats.missing_category, stats.unknown_category)
    return out


def write_candidates(path: str | Path, sets: Iterable[CandidateSet]) -> int:
    return write_jsonl(path, (cs.to_record() for cs in sets))


def read_candidates(path: str | Path) -> list[CandidateSet]:
    return [CandidateSet.from_record(rec) for _, rec in iter_jsonl(path)]


def candidates_by_tag(sets: Sequence[CandidateSet]) -> dict[str, CandidateSet]:
    return {cs.tag_id: cs for cs in sets}
