import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import forest_taxonomy, random_forest, tag
from taglink.blocker import build_index
from taglink.candgen import (
    CandidateSet,
    FilterMode,
    FilterStats,
    UnknownCategoryError,
    filter_actors,
    generate,
    read_candidates,
    write_candidates,
)
from taglink.kg import Actor, build_registry


def registry_on(taxonomy, concept_sets):
    actors = [Actor(f"a{i}", f"Actor {i}", frozenset(cs)) for i, cs in enumerate(concept_sets)]
    return build_registry(actors, taxonomy)


def test_none_is_everyone(registry):
    assert filter_actors(registry, tag(category="exchange"), "none") == set(registry.actors)


def test_exact_concept_kept_in_both_modes(registry):
    for mode in ("same_concept", "related_concept"):
        assert "kraken" in filter_actors(registry, tag(category="exchange"), mode)


def test_related_concept_on_small_taxonomy(small_taxonomy):
    reg = registry_on(small_taxonomy, [{"y"}, {"x1"}, {"r"}, {"x"}])
    related = filter_actors(reg, tag(category="x"), "related_concept")
    assert related == {"a1", "a2", "a3"}
    assert filter_actors(reg, tag(category="x"), "same_concept") == {"a3"}


def test_missing_or_unknown_category_falls_back(small_taxonomy):
    reg = registry_on(small_taxonomy, [{"y"}, {"x1"}])
    stats = FilterStats()
    assert filter_actors(reg, tag(category=None), "same_concept", stats=stats) == {"a0", "a1"}
    assert filter_actors(reg, tag(category="nope"), "related_concept", stats=stats) == {"a0", "a1"}
    assert (stats.missing_category, stats.unknown_category) == (1, 1)
    with pytest.raises(UnknownCategoryError):
        filter_actors(reg, tag(category="nope"), "same_concept", strict=True)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_filter_modes_nest(seed):
    rng = random.Random(seed)
    parent = random_forest(rng, rng.randint(1, 25))
    tax = forest_taxonomy(parent)
    concepts = list(parent)
    reg = registry_on(tax, [set(rng.sample(concepts, rng.randint(1, min(3, len(concepts)))))
                            for _ in range(rng.randint(1, 20))])
    t = tag(category=rng.choice(concepts + [None, "unknown"]))
    same = filter_actors(reg, t, "same_concept")
    related = filter_actors(reg, t, "related_concept")
    assert same <= related <= filter_actors(reg, t, "none")


def test_generate_empty_list(registry):
    assert generate(registry, [], "related_concept", build_index(registry), 5) == []


def test_generate_keeps_order_and_mask(registry):
    tags = [tag("t1", "kraken", category="exchange"), tag("t2", "uniswap router", category="defi")]
    sets = generate(registry, tags, FilterMode.RELATED_CONCEPT, build_index(registry), 5)
    assert [cs.tag_id for cs in sets] == ["t1", "t2"]
    assert sets[0].actor_ids[0] == "kraken"
    assert sets[1].actor_ids[0] == "uniswap"
    defi = registry.taxonomy.related_concepts("defi")
    assert all(registry[a].concepts & defi for a in sets[1].actor_ids)


def test_filtered_set_is_subsequence_of_unfiltered_ranking(registry):
    scorer = build_index(registry)
    t = tag("t", "kraken exchange", category="exchange")
    full = generate(registry, [t], "none", scorer, len(registry))[0].actor_ids
    masked = generate(registry, [t], "same_concept", scorer, 5)[0].actor_ids
    allowed = filter_actors(registry, t, "same_concept")
    assert masked == [a for a in full if a in allowed][:5]


def test_candidates_round_trip(tmp_path, registry):
    sets = generate(registry, [tag("t1", "kraken", category="exchange")], "none",
                    build_index(registry), 3)
    write_candidates(tmp_path / "c.jsonl", sets)
    back = read_candidates(tmp_path / "c.jsonl")
    assert back == sets
    assert back[0].prefix(1).actor_ids == sets[0].actor_ids[:1]
    assert isinstance(back[0], CandidateSet)
