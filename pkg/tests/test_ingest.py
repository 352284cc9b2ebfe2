import csv
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tag
from taglink.ingest import (
    dataset_summary,
    dedup,
    events_to_tags,
    exclude_by_address,
    filter_events_by_funds,
    load_events,
    load_tags,
    normalize_label,
    read_tags,
    sample_events,
    split,
    write_tags,
)
from taglink.records import RecordError, write_jsonl


def test_normalize_label():
    assert normalize_label("  Binance \t Hot\nWallet ") == "Binance Hot Wallet"
    assert normalize_label("Café") == "Café"


def test_dedup_examples():
    assert len(dedup([tag("t1", "btc-e.com", actor="btce"), tag("t2", "btc-e.com", actor="btce")])) == 1
    assert len(dedup([tag("t1", "btc-e.com", actor="btce"), tag("t2", "btc-e", actor="btce")])) == 2


def test_dedup_against_unique_key_scan():
    rng = random.Random(3)
    labels = ["Kraken", "kraken", "Binance", "Gemini", "Aave v2"]
    tags = [tag(f"t{i}", rng.choice(labels), actor=rng.choice(["a", "b", None])) for i in range(300)]
    expected = []
    for t in tags:
        if not any(e.label.lower() == t.label.lower() and e.actor_link == t.actor_link for e in expected):
            expected.append(t)
    assert dedup(tags) == expected


@settings(max_examples=80)
@given(st.lists(st.tuples(st.sampled_from(["A", "a", "B", "c d"]), st.sampled_from(["x", "y", None]))))
def test_dedup_idempotent_and_unique(pairs):
    tags = [tag(f"t{i}", lab, actor=act) for i, (lab, act) in enumerate(pairs)]
    once = dedup(tags)
    assert dedup(once) == once
    keys = [(t.label.casefold(), t.actor_link) for t in once]
    assert len(keys) == len(set(keys))


def test_exclude_by_address():
    t_in = tag("t1", "x", address="0xabc")
    t_none = tag("t2", "y")
    assert exclude_by_address([t_in, t_none], {"0xabc"}) == [t_none]


def test_exclude_by_address_against_linear_scan():
    rng = random.Random(5)
    pool = [f"0x{i:04x}" for i in range(600)]
    known = rng.sample(pool, 300)
    tags = [tag(f"t{i}", "lab", address=rng.choice(pool + [None])) for i in range(1000)]
    expected = [t for t in tags if not (t.address is not None and any(t.address == a for a in known))]
    assert exclude_by_address(tags, known) == expected


def test_funds_filter_is_strict():
    evs = [{"funds_usd": 100_000}, {"funds_usd": 100_001}, {"funds_usd": None}, {}]
    assert filter_events_by_funds(evs, 100_000) == [{"funds_usd": 100_001}]


def test_funds_filter_on_fixture(data_dir):
    events = load_events(data_dir / "events.jsonl")
    expected = []
    for e in events:
        f = e.get("funds_usd")
        if f is not None and f > 100_000:
            expected.append(e)
    assert filter_events_by_funds(events, 100_000) == expected


def test_split_sizes_for_1_30_69():
    tags = [tag(f"t{i}", f"l{i}") for i in range(2570)]
    assert split(tags, (1, 30, 69), seed=0).sizes == (25, 771, 1774)
    assert split(tags[:100], (1, 1, 0), seed=0).sizes == (50, 50, 0)


@settings(max_examples=50)
@given(st.integers(0, 400), st.integers(0, 1000))
def test_split_partitions_deterministically(n, seed):
    tags = [tag(f"t{i}", f"l{i}") for i in range(n)]
    a = split(tags, (1, 30, 69), seed)
    b = split(tags, (1, 30, 69), seed)
    assert a == b
    ids = [t.tag_id for part in (a.train, a.validation, a.test) for t in part]
    assert sorted(ids) == sorted(t.tag_id for t in tags)
    for part in (a.train, a.validation, a.test):
        order = [tags.index(t) for t in part]
        assert order == sorted(order)


def test_empty_file(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert load_tags(p, "tagpack") == []
    assert load_events(p) == []


def test_tagpack_yaml_header_inheritance(tmp_path):
    p = tmp_path / "pack.yaml"
    p.write_text(
        "title: demo\ncategory: exchange\nactor: kraken\ntags:\n"
        "  - label: Kraken hot wallet\n    address: '0x1'\n"
        "  - label: Binance 14\n    address: '0x2'\n    actor: binance\n"
        "  - label: '  '\n    address: '0x3'\n"
    )
    rejects = []
    tags = load_tags(p, "tagpack", source="gs", rejects=rejects)
    assert [(t.label, t.category, t.actor_link) for t in tags] == [
        ("Kraken hot wallet", "exchange", "kraken"), ("Binance 14", "exchange", "binance")]
    assert tags[0].tag_id == "gs-000001"
    assert len(rejects) == 1


def test_missing_label_field_names_line(tmp_path):
    p = tmp_path / "bad.jsonl"
    write_jsonl(p, [{"label": "ok"}, {"address": "0x1"}])
    with pytest.raises(RecordError, match="2"):
        load_tags(p, "tagpack")


def test_watchyourback_counts(tmp_path):
    p = tmp_path / "wyb.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "address", "category", "subcategory", "actor"])
        for i in range(126):
            w.writerow([f"service {i}", f"0x{i}", "Exchange", "", "kraken" if i < 67 else ""])
    tags = load_tags(p, "watchyourback")
    summary = dataset_summary(tags)
    assert (summary["samples"], summary["actor_links"]) == (126, 67)


def test_watchyourback_fixture(data_dir):
    tags = load_tags(data_dir / "watchyourback.csv", "watchyourback")
    assert len(tags) == 40
    assert sum(t.actor_link is not None for t in tags) == 26


def test_event_db_titles(data_dir):
    tags = load_tags(data_dir / "events.jsonl", "event_db")
    assert len(tags) == 60
    assert all(t.address is None for t in tags)


def test_event_sampling_keeps_order_and_is_seeded(data_dir):
    events = load_events(data_dir / "events.jsonl")
    a = sample_events(events, 10, seed=1)
    assert a == sample_events(events, 10, seed=1)
    assert [e["_line"] for e in a] == sorted(e["_line"] for e in a)
    tags = events_to_tags(a)
    assert [t.tag_id for t in tags] == [f"event_db-{e['_line']:06d}" for e in a]


def test_tags_round_trip(tmp_path, data_dir):
    tags = load_tags(data_dir / "graphsense_tags.jsonl", "tagpack", source="gs")
    write_tags(tmp_path / "t.jsonl", tags)
    assert read_tags(tmp_path / "t.jsonl") == tags
    assert len(dedup(tags)) == 193
