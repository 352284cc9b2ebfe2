import json
from dataclasses import replace

import pytest

from taglink.pipeline import ConfigError, RunConfig, load_config, run_pipeline, validate_config
from taglink.records import read_jsonl


@pytest.fixture
def config(data_dir):
    return load_config(data_dir / "fixture_run.yaml")


ARTIFACTS = ("tags.jsonl", "train.jsonl", "candidates.jsonl", "examples.jsonl", "decisions.jsonl",
             "report.json", "report.txt", "cost.json")


def test_fixture_config_is_valid(config):
    assert validate_config(config) == []


def test_all_violations_reported_at_once(config):
    bad = replace(config, k=0, template=10, actors="/nonexistent/actors.jsonl")
    problems = validate_config(bad)
    assert "k ≥ 1 required" in problems
    assert any("template id" in p for p in problems)
    assert any("actors file not found" in p for p in problems)


def test_unknown_keys_rejected(data_dir):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"actors": "a", "taxonomy": "t", "datasets": [], "api_key": "x"})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"actors": "a", "taxonomy": "t", "datasets": [], "backend": {"token": "x"}})


def test_run_is_deterministic(config, tmp_path):
    a = run_pipeline(config, tmp_path / "a")
    b = run_pipeline(config, tmp_path / "b")
    assert a.status == b.status == 0
    for name in ARTIFACTS:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    assert a.manifest["artifacts"] == b.manifest["artifacts"]


def test_oracle_mock_accuracy_equals_recall_on_linked_tags(config, tmp_path):
    linked_only = replace(config, datasets=config.datasets[:1])
    result = run_pipeline(linked_only, tmp_path)
    recall = next(r for r in result.report["recall"] if r["k"] == config.k)
    assert recall["excluded"] == 0
    assert result.report["systems"]["llm:mock"]["metrics"]["accuracy"] == recall["recall"]


def test_manifest_round_trip(config, tmp_path):
    first = run_pipeline(config, tmp_path / "first")
    again = run_pipeline(load_config(tmp_path / "first" / "manifest.json"), tmp_path / "again")
    assert again.status == 0
    assert again.manifest["artifacts"] == first.manifest["artifacts"]
    assert again.manifest["config"] == first.manifest["config"]


def test_missing_registry_is_config_error(config, tmp_path):
    result = run_pipeline(replace(config, actors=str(tmp_path / "missing.jsonl")), tmp_path / "out")
    assert result.status == 2
    assert not (tmp_path / "out").exists()


def test_stage_failure_is_recorded(config, tmp_path, data_dir):
    broken = replace(config, backend=replace(config.backend, mock_mode="fixture",
                                             mock_fixture=str(data_dir / "recorded_responses.jsonl")))
    result = run_pipeline(broken, tmp_path)
    # missing recordings are failed no-matches, not a stage failure
    assert result.status == 0
    assert result.manifest["stages"]["link"]["failed"] == 96

    bad_tags = tmp_path / "bad.jsonl"
    bad_tags.write_text('{"label": "Kraken", "actor": "not-an-actor"}\n')
    ds = replace(config.datasets[1], path=str(bad_tags), kind="tagpack")
    result = run_pipeline(replace(config, datasets=[ds], shots=0), tmp_path / "fail")
    assert result.status == 1
    manifest = json.loads((tmp_path / "fail" / "manifest.json").read_text())
    assert manifest["failed_stage"] == "ingest"
    assert manifest["status"] == "failed"


def test_report_contents(config, tmp_path):
    result = run_pipeline(config, tmp_path)
    report = result.report
    assert [r["k"] for r in report["recall"]] == [1, 5, 10, 25]
    assert set(report["systems"]) == {"llm:mock", "bm25_3-threshold"}
    assert set(report["systems"]["llm:mock"]["by_source"]) == {"graphsense", "wyb"}
    assert len(read_jsonl(tmp_path / "examples.jsonl")) == 5
    cost = json.loads((tmp_path / "cost.json").read_text())
    assert cost["entries"][0]["value"] == report["systems"]["llm:mock"]["metrics"]["macro_f1"]
