import pytest

from taglink.convert import concept_records, convert, tagpack_records
from taglink.ingest import load_tags
from taglink.kg import load_taxonomy


def test_concept_id_field_wins_over_key(tmp_path):
    (tmp_path / "concepts.yaml").write_text(
        "defi:\n  id: defi\n  type: concept\n  prefLabel: DeFi\n"
        "defi_derivatives:\n  id: defi_derivative\n  type: concept\n  prefLabel: Derivatives\n  broader: defi\n"
        "perp:\n  id: perp\n  type: concept\n  prefLabel: Perpetuals\n  broader: defi_derivatives\n"
        "meta:\n  type: scheme\n"
    )
    recs = list(concept_records(tmp_path / "concepts.yaml"))
    assert [(r["id"], r["parent"]) for r in recs] == [
        ("defi", None), ("defi_derivative", "defi"), ("perp", "defi_derivative")]
    convert("taxonomy", tmp_path / "concepts.yaml", tmp_path / "tax.jsonl")
    assert load_taxonomy(tmp_path / "tax.jsonl").ancestors("perp") == ["defi_derivative", "defi"]


def test_tagpack_directory(tmp_path):
    (tmp_path / "packs").mkdir()
    (tmp_path / "packs" / "a.yaml").write_text(
        "category: exchange\nactor: kraken\ntags:\n  - label: Kraken 1\n    address: '0x1'\n")
    (tmp_path / "packs" / "b.yaml").write_text(
        "category: exchange\ntags:\n  - label: unlinked\n    address: '0x2'\n"
        "  - label: Binance 2\n    address: '0x3'\n    actor: binance\n")
    (tmp_path / "packs" / "notes.yaml").write_text("just: metadata\n")
    n = convert("tagpacks", tmp_path / "packs", tmp_path / "tags.jsonl")
    assert n == 2
    tags = load_tags(tmp_path / "tags.jsonl", "tagpack")
    assert [(t.label, t.actor_link) for t in tags] == [("Kraken 1", "kraken"), ("Binance 2", "binance")]
    assert len(list(tagpack_records(tmp_path / "packs", linked_only=False))) == 3


def test_unknown_conversion(tmp_path):
    with pytest.raises(ValueError):
        convert("events", tmp_path, tmp_path / "x")
