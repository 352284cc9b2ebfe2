"""Actor knowledge graph and concept taxonomy."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .records import RecordError, iter_jsonl


class KGError(ValueError):
    """Registry or taxonomy validation failed.

    ``problems`` holds every violation found, not only the first one.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _clean_id(value) -> str:
    return str(value).strip()


@dataclass(frozen=True)
class Concept:
    id: str
    label: str
    parent: str | None = None


@dataclass(frozen=True)
class Actor:
    id: str
    label: str
    concepts: frozenset[str]
    uri: str | None = None
    jurisdiction: str | None = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "categories": sorted(self.concepts),
            "uri": self.uri,
            "jurisdiction": self.jurisdiction,
        }


class ConceptTaxonomy:
    """A forest of single-parent concepts."""

    def __init__(self, concepts: Iterable[Concept] = ()):
        by_id: dict[str, Concept] = {}
        problems = []
        for c in concepts:
            if c.id in by_id:
                problems.append(f"duplicate concept id {c.id!r}")
                continue
            by_id[c.id] = c
        for c in by_id.values():
            if c.parent is not None and c.parent not in by_id:
                problems.append(f"concept {c.id!r} has unknown parent {c.parent!r}")
        if problems:
            raise KGError(problems)
        cycle = _find_cycle(by_id)
        if cycle:
            raise KGError(["cyclic taxonomy: " + " -> ".join(cycle)])

        self._concepts = by_id
        children: dict[str, list[str]] = {cid: [] for cid in by_id}
        for c in by_id.values():
            if c.parent is not None:
                children[c.parent].append(c.id)
        self._children = {k: tuple(sorted(v)) for k, v in children.items()}

    def __contains__(self, concept_id: str) -> bool:
        return concept_id in self._concepts

    def __len__(self) -> int:
        return len(self._concepts)

    def __iter__(self) -> Iterator[Concept]:
        return (self._concepts[k] for k in sorted(self._concepts))

    def get(self, concept_id: str) -> Concept:
        try:
            return self._concepts[concept_id]
        except KeyError:
            raise KeyError(f"unknown concept {concept_id!r}") from None

    def children(self, concept_id: str) -> tuple[str, ...]:
        self.get(concept_id)
        return self._children[concept_id]

    def ancestors(self, concept_id: str) -> list[str]:
        """Strict ancestors ordered from parent up to the root."""
        out = []
        parent = self.get(concept_id).parent
        while parent is not None:
            out.append(parent)
            parent = self._concepts[parent].parent
        return out

    def descendants(self, concept_id: str) -> set[str]:
        out: set[str] = set()
        stack = list(self.children(concept_id))
        while stack:
            cid = stack.pop()
            out.add(cid)
            stack.extend(self._children[cid])
        return out

    def related_concepts(self, concept_id: str) -> set[str]:
        """The concept, its ancestors and its descendants; siblings' subtrees are left out."""
        return {concept_id} | set(self.ancestors(concept_id)) | self.descendants(concept_id)


def _find_cycle(concepts: Mapping[str, Concept]) -> list[str] | None:
    state: dict[str, int] = {}  # 1 = on current path, 2 = done
    for start in sorted(concepts):
        path: list[str] = []
        node: str | None = start
        while node is not None and state.get(node) is None:
            state[node] = 1
            path.append(node)
            node = concepts[node].parent
        if node is not None and state.get(node) == 1:
            return path[path.index(node):] + [node]
        for n in path:
            state[n] = 2
    return None


@dataclass(frozen=True)
class ActorRegistry:
    actors: Mapping[str, Actor]
    taxonomy: ConceptTaxonomy = field(default_factory=ConceptTaxonomy)

    def __post_init__(self):
        ordered = {k: self.actors[k] for k in sorted(self.actors)}
        object.__setattr__(self, "actors", MappingProxyType(ordered))

    def __len__(self) -> int:
        return len(self.actors)

    def __iter__(self) -> Iterator[Actor]:
        return iter(self.actors.values())

    def __contains__(self, actor_id: str) -> bool:
        return actor_id in self.actors

    def __getitem__(self, actor_id: str) -> Actor:
        return self.actors[actor_id]

    @property
    def ids(self) -> list[str]:
        return list(self.actors)


def build_registry(actors: Iterable[Actor], taxonomy: ConceptTaxonomy) -> ActorRegistry:
    by_id: dict[str, Actor] = {}
    problems = []
    for a in actors:
        if a.id in by_id:
            problems.append(f"duplicate actor id {a.id!r}")
            continue
        by_id[a.id] = a
        for cid in sorted(a.concepts):
            if cid not in taxonomy:
                problems.append(f"actor {a.id!r} references unknown concept {cid!r}")
    if problems:
        raise KGError(problems)
    return ActorRegistry(by_id, taxonomy)


def concept_from_record(rec: dict) -> Concept:
    if "id" not in rec:
        raise ValueError("concept record without 'id'")
    parent = rec.get("parent")
    if isinstance(parent, (list, tuple)):
        if len(parent) > 1:
            raise ValueError(f"concept {rec['id']!r} has multiple parents {list(parent)}")
        parent = parent[0] if parent else None
    cid = _clean_id(rec["id"])
    if not cid:
        raise ValueError("empty concept id")
    parent = _clean_id(parent) if parent not in (None, "") else None
    return Concept(cid, str(rec.get("label") or cid), parent or None)


def actor_from_record(rec: dict) -> Actor:
    missing = [k for k in ("id", "label", "categories") if k not in rec]
    if missing:
        raise ValueError(f"actor record missing {', '.join(missing)}")
    aid = _clean_id(rec["id"])
    label = str(rec["label"]).strip()
    cats = rec["categories"]
    if isinstance(cats, str):
        cats = [cats]
    concepts = frozenset(_clean_id(c) for c in cats if _clean_id(c))
    if not aid:
        raise ValueError("empty actor id")
    if not label:
        raise ValueError(f"actor {aid!r} has an empty label")
    if not concepts:
        raise ValueError(f"actor {aid!r} has no categories")
    return Actor(aid, label, concepts, rec.get("uri") or None, rec.get("jurisdiction") or None)


def load_taxonomy(path: str | Path) -> ConceptTaxonomy:
    concepts, problems = [], []
    for lineno, rec in iter_jsonl(path):
        try:
            concepts.append(concept_from_record(rec))
        except ValueError as exc:
            problems.append(f"{path}:{lineno}: {exc}")
    if problems:
        raise KGError(problems)
    return ConceptTaxonomy(concepts)


def bundled_taxonomy_path() -> Path:
    """The DWVA-derived concept taxonomy shipped with the package."""
    return Path(__file__).parent / "data" / "dwva_concepts.jsonl"


def load_registry(actors_path: str | Path, taxonomy_path: str | Path) -> ActorRegistry:
    """Load and validate the actor registry against its taxonomy.

    All validation problems are collected before raising ``KGError``.
    Malformed JSON raises ``RecordError`` immediately.
    """
    taxonomy = load_taxonomy(taxonomy_path)
    actors, problems = [], []
    for lineno, rec in iter_jsonl(actors_path):
        try:
            actors.append(actor_from_record(rec))
        except ValueError as exc:
            problems.append(f"{actors_path}:{lineno}: {exc}")
    if problems:
        raise KGError(problems)
    return build_registry(actors, taxonomy)


__all__ = [
    "Actor",
    "ActorRegistry",
    "Concept",
    "ConceptTaxonomy",
    "KGError",
    "RecordError",
    "build_registry",
    "bundled_taxonomy_path",
    "load_registry",
    "load_taxonomy",
]
