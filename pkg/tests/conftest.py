import random
import sys
from pathlib import Path

import pytest

from taglink.ingest import AttributionTag
from taglink.kg import Actor, Concept, ConceptTaxonomy, build_registry, load_registry

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def registry():
    return load_registry(DATA / "actors.jsonl", DATA / "taxonomy.jsonl")


@pytest.fixture
def small_taxonomy():
    # r -> {x, y}, x -> x1
    return ConceptTaxonomy([Concept("r", "R"), Concept("x", "X", "r"), Concept("y", "Y", "r"),
                            Concept("x1", "X1", "x")])


def random_forest(rng: random.Random, n: int) -> dict[str, str | None]:
    """Random single-parent forest as a child -> parent mapping."""
    ids = [f"c{i}" for i in range(n)]
    parent: dict[str, str | None] = {}
    for i, cid in enumerate(ids):
        parent[cid] = None if i == 0 or rng.random() < 0.15 else ids[rng.randrange(i)]
    return parent


def forest_taxonomy(parent: dict[str, str | None]) -> ConceptTaxonomy:
    return ConceptTaxonomy([Concept(c, c, p) for c, p in parent.items()])


def make_registry(labels: list[str], concepts=None, taxonomy=None):
    taxonomy = taxonomy or ConceptTaxonomy([Concept("exchange", "Exchange")])
    concepts = concepts or [{"exchange"}] * len(labels)
    actors = [Actor(f"a{i:03d}", lab, frozenset(c)) for i, (lab, c) in enumerate(zip(labels, concepts))]
    return build_registry(actors, taxonomy)


def tag(tag_id="t1", label="x", category=None, actor=None, address=None, source="test"):
    return AttributionTag(tag_id, label, source, address, category, actor)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
