"""Unit tests for experiment configs, seeds, the batch runner and reports."""

from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from src.core.errors import ConfigError, ReportError
from src.experiments.report import build_report, load_results, order_by_outcome, plot_series, summary_table
from src.experiments.runner import BASE_COLUMNS, ResultWriter, run_experiment
from src.experiments.schemas import (
    CounterfeitConfig,
    ResultRecord,
    SoundnessConfig,
    config_digest,
    load_config,
    parse_config,
)
from src.experiments.seeds import canonical_key, child_int, child_rng
from tests.fixtures.factories import (
    CalculusConfigFactory,
    CounterfeitConfigFactory,
    DualityConfigFactory,
    NpCandidateConfigFactory,
    PiracyConfigFactory,
    SoundnessConfigFactory,
)


def _csv_body(path) -> list[str]:
    return path.read_text().splitlines()[1:]


# ---------------------------------------------------------------------------
# Configs
# ---------------------------------------------------------------------------


def test_parse_config_dispatches_on_kind() -> None:
    config = parse_config(SoundnessConfigFactory())
    assert isinstance(config, SoundnessConfig)
    assert config.ns == [4, 8]
    assert isinstance(parse_config(CounterfeitConfigFactory()), CounterfeitConfig)


def test_config_rejects_unknown_keys() -> None:
    with pytest.raises(ConfigError):
        parse_config(SoundnessConfigFactory(instancez=3))


def test_config_requires_multiples_of_four() -> None:
    with pytest.raises(ConfigError):
        parse_config(SoundnessConfigFactory(ns=[4, 6]))
    with pytest.raises(ConfigError):
        parse_config({"kind": "completeness", "experiment_id": "c", "ns": [0]})


def test_config_rejects_unknown_kind_and_bad_ranges() -> None:
    with pytest.raises(ConfigError):
        parse_config({"kind": "telepathy", "experiment_id": "t"})
    with pytest.raises(ConfigError):
        parse_config(SoundnessConfigFactory(seed=-1))
    with pytest.raises(ConfigError):
        parse_config(CounterfeitConfigFactory(mode="guess"))


def test_load_config_errors(tmp_path) -> None:
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(listing)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(DualityConfigFactory()))
    assert load_config(good).kind == "duality"


def test_config_digest_is_stable() -> None:
    payload = SoundnessConfigFactory(experiment_id="fixed")
    first = config_digest(parse_config(payload))
    assert first == config_digest(parse_config(dict(payload)))
    assert len(first) == 16
    assert first != config_digest(parse_config({**payload, "seed": 43}))


def test_output_prefix_defaults_to_experiment_id() -> None:
    config = parse_config(SoundnessConfigFactory(experiment_id="sweep"))
    assert config.prefix == "sweep"
    assert parse_config(SoundnessConfigFactory(output_prefix="custom")).prefix == "custom"


def test_result_record_row_flattens_sections() -> None:
    record = ResultRecord(
        experiment_id="e",
        kind="soundness",
        key="n=4",
        seed=1,
        config_digest="abc",
        params={"n": 4},
        measured={"mean": 0.5},
        claimed={"max_cheat": 0.5},
        notes=["a", "b"],
    )
    row = record.to_row()
    assert row["param.n"] == 4
    assert row["measured.mean"] == 0.5
    assert row["claimed.max_cheat"] == 0.5
    assert row["notes"] == "a; b"
    assert record.passed
    with pytest.raises(ValueError):
        ResultRecord(experiment_id="e", kind="k", key="k", seed=0, config_digest="d", surprise=1)


# ---------------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------------


def test_canonical_key_sorts_and_formats() -> None:
    assert canonical_key({"b": 1, "a": 0.5}) == "a=0.5|b=1"
    assert canonical_key({"ns": [4, 8], "c": 2 / 3}) == "c=0.666666666667|ns=4,8"


def test_child_streams_depend_only_on_key() -> None:
    first = child_rng(7, "point").random(4)
    assert np.array_equal(first, child_rng(7, "point").random(4))
    assert not np.array_equal(first, child_rng(7, "other").random(4))
    assert not np.array_equal(first, child_rng(8, "point").random(4))
    value = child_int(7, "point")
    assert value == child_int(7, "point")
    assert 0 <= value < 2**32


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def test_soundness_run_writes_csv_and_json(results_dir) -> None:
    config = parse_config(SoundnessConfigFactory(experiment_id="sound"))
    result = run_experiment(config, results_dir)
    assert len(result.records) == 4
    assert result.counts == {"pass": 4}
    assert result.exit_status == 0
    lines = result.csv_path.read_text().splitlines()
    assert lines[0].startswith("# generated_at=")
    payload = json.loads(result.json_path.read_text())
    assert payload["config_digest"] == config_digest(config)
    assert len(payload["records"]) == 4


def test_csv_body_is_reproducible(tmp_path) -> None:
    config = parse_config(SoundnessConfigFactory(experiment_id="repro"))
    first = run_experiment(config, tmp_path / "a")
    second = run_experiment(config, tmp_path / "b")
    assert _csv_body(first.csv_path) == _csv_body(second.csv_path)


def test_result_files_do_not_depend_on_jobs(tmp_path) -> None:
    config = parse_config(
        PiracyConfigFactory(
            experiment_id="jobs", pirates=["forward-and-pad", "coherent-copy"], export_queries=True
        )
    )
    serial = run_experiment(config, tmp_path / "serial", jobs=1)
    parallel = run_experiment(config, tmp_path / "parallel", jobs=4)
    assert _csv_body(serial.csv_path) == _csv_body(parallel.csv_path)
    assert serial.queries_path.read_bytes() == parallel.queries_path.read_bytes()


def test_records_are_sorted_by_key(results_dir) -> None:
    result = run_experiment(parse_config(DualityConfigFactory()), results_dir)
    keys = [r.key for r in result.records]
    assert keys == sorted(keys)
    assert all(r.outcome == "pass" for r in result.records)


def test_piracy_run_checks_closed_forms(results_dir) -> None:
    result = run_experiment(parse_config(PiracyConfigFactory()), results_dir)
    assert result.counts == {"pass": 2}
    by_pirate = {r.params["pirate"]: r for r in result.records}
    assert by_pirate["forward-and-pad"].measured["joint_accept"] == pytest.approx(0.25)
    assert by_pirate["measure-resend"].claimed["closed_form"] == pytest.approx(2.0**-4)


def test_piracy_run_exports_queries_and_chain(results_dir) -> None:
    config = parse_config(
        PiracyConfigFactory(pirates=["coherent-copy"], reduction_chain=True, export_queries=True)
    )
    result = run_experiment(config, results_dir)
    assert result.queries_path is not None and result.queries_path.exists()
    queries = pd.read_csv(result.queries_path)
    assert list(queries.columns) == ["key", "trial", "query_index", "oracle_id", "mass_set_id", "mass"]
    # coherent-copy makes one query; its own member set is always exported
    assert len(queries) == 1
    row = queries.iloc[0]
    assert row["query_index"] == 0
    assert row["mass_set_id"] == "member"
    assert 0.0 <= row["mass"] <= 1.0
    record = result.records[0]
    assert record.extra["reduction_chain"]["holds"] is True
    assert record.outcome == "pass"


def test_counterfeit_run_has_one_record_per_budget(results_dir) -> None:
    result = run_experiment(parse_config(CounterfeitConfigFactory()), results_dir)
    assert sorted(r.params["q"] for r in result.records) == [0, 1, 2]
    assert all(r.outcome == "pass" for r in result.records)


def test_amplification_skips_points_without_a_gap(results_dir) -> None:
    config = parse_config(
        CalculusConfigFactory(study="amplification", cs=[0.75], qs=[1, 2], ells=[1, 2])
    )
    result = run_experiment(config, results_dir)
    assert result.counts == {"pass": 2, "skipped": 2}
    assert result.exit_status == 0


def test_pipeline_study_records_stage_reports(results_dir) -> None:
    config = parse_config(CalculusConfigFactory(presets=["perfect"], q=2, ell1=1, ell2=1))
    result = run_experiment(config, results_dir)
    record = result.records[0]
    assert record.outcome in {"pass", "flag"}
    assert len(record.extra["pipeline"]["stages"]) == 4


def test_useful_bound_study(results_dir) -> None:
    config = parse_config(CalculusConfigFactory(study="useful_bound", dims=[2], samples=3))
    result = run_experiment(config, results_dir)
    assert result.records[0].outcome in {"pass", "flag"}
    assert result.records[0].measured["worst_ratio"] <= 1.0 + 1e-6


def test_npcand_run(results_dir) -> None:
    result = run_experiment(parse_config(NpCandidateConfigFactory()), results_dir)
    record = result.records[0]
    assert record.outcome == "pass"
    assert record.claimed["zero_state"] == pytest.approx(0.25)
    assert "idealized-primitive mode" in record.notes


def test_writer_handles_empty_runs(tmp_path) -> None:
    writer = ResultWriter(tmp_path, "empty")
    path = writer.write_csv([])
    frame = load_results(path)
    assert frame.empty
    assert list(frame.columns) == BASE_COLUMNS


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def test_order_by_outcome_puts_failures_first() -> None:
    frame = pd.DataFrame(
        {"kind": ["k"] * 4, "key": ["a", "b", "c", "d"], "outcome": ["pass", "fail", "skipped", "flag"]}
    )
    assert order_by_outcome(frame)["outcome"].tolist() == ["fail", "flag", "pass", "skipped"]
    table = summary_table(frame)
    assert list(table.columns) == ["kind", "fail", "flag", "pass", "skipped"]
    assert table.iloc[0]["fail"] == 1


def test_report_from_a_counterfeit_run(results_dir) -> None:
    config = parse_config(CounterfeitConfigFactory(experiment_id="cf"))
    run_experiment(config, results_dir)
    report = build_report(results_dir / "cf", series_out=results_dir / "cf.series.csv")
    assert not report.failed
    assert report.series["x"].tolist() == [0, 1, 2]
    assert (report.series["series"] == "counterfeit|n=4|attack=measure-and-guess").all()
    assert report.written and report.written[0].exists()
    assert "Outcomes by kind" in report.render()


def test_report_series_for_piracy(results_dir) -> None:
    run_experiment(parse_config(PiracyConfigFactory(experiment_id="pir")), results_dir)
    series = plot_series(load_results(results_dir / "pir.csv"))
    assert len(series) == 2
    assert series["reference"].tolist() == pytest.approx([0.25, 0.25])


def test_report_stage_table(results_dir) -> None:
    config = parse_config(CalculusConfigFactory(experiment_id="pipe", presets=["perfect"], q=2, ell1=1, ell2=1))
    run_experiment(config, results_dir)
    report = build_report(results_dir / "pipe.json")
    assert len(report.stages) == 4
    assert set(report.stages["stage"]) == {
        "amplify_gap",
        "product_test_collapse",
        "sequential_repeat",
        "drop_unentanglement",
    }


def test_missing_results_raise(tmp_path) -> None:
    with pytest.raises(ReportError):
        load_results(tmp_path / "nothing")
