from __future__ import annotations

import json

import pandas as pd
import pytest

from src.experiments.cli import EXIT_FAILED, EXIT_INVALID, EXIT_OK, calculus_main, main, piracy_main
from tests.fixtures.factories import CounterfeitConfigFactory, PiracyConfigFactory, SoundnessConfigFactory


def _write_config(tmp_path, payload: dict) -> str:
    path = tmp_path / f"{payload['experiment_id']}.json"
    path.write_text(json.dumps(payload))
    return str(path)


@pytest.mark.e2e
def test_soundness_run_then_report(tmp_path, capsys) -> None:
    config = _write_config(tmp_path, SoundnessConfigFactory(experiment_id="sound-e2e"))
    out = tmp_path / "results"

    assert main(["soundness", "--config", config, "--out", str(out)]) == EXIT_OK
    assert (out / "sound-e2e.csv").exists()
    assert (out / "sound-e2e.json").exists()
    assert "pass: 4" in capsys.readouterr().out

    assert main(["report", str(out / "sound-e2e")]) == EXIT_OK
    assert "Outcomes by kind" in capsys.readouterr().out


@pytest.mark.e2e
def test_run_with_seed_override_and_metrics(tmp_path) -> None:
    config = _write_config(tmp_path, PiracyConfigFactory(experiment_id="pir-e2e"))
    out = tmp_path / "results"
    metrics = tmp_path / "lab.prom"

    status = main(["run", "--config", config, "--out", str(out), "--seed", "9", "--metrics-out", str(metrics)])
    assert status == EXIT_OK
    payload = json.loads((out / "pir-e2e.json").read_text())
    assert payload["config"]["seed"] == 9
    assert all(r["outcome"] == "pass" for r in payload["records"])
    assert "lab_experiment_records_total" in metrics.read_text()


@pytest.mark.e2e
def test_report_writes_series(tmp_path) -> None:
    config = _write_config(tmp_path, CounterfeitConfigFactory(experiment_id="cf-e2e"))
    out = tmp_path / "results"
    assert main(["counterfeit", "--config", config, "--out", str(out)]) == EXIT_OK

    series = tmp_path / "series.csv"
    assert main(["report", str(out / "cf-e2e.csv"), "--series-out", str(series)]) == EXIT_OK
    frame = pd.read_csv(series)
    assert frame["x"].tolist() == [0, 1, 2]


@pytest.mark.e2e
def test_report_exits_nonzero_on_failed_records(tmp_path) -> None:
    results = tmp_path / "broken.csv"
    pd.DataFrame(
        {"kind": ["soundness", "soundness"], "key": ["n=4", "n=8"], "outcome": ["pass", "fail"]}
    ).to_csv(results, index=False)
    assert main(["report", str(results)]) == EXIT_FAILED


@pytest.mark.e2e
def test_invalid_inputs_exit_two(tmp_path, capsys) -> None:
    bad = _write_config(tmp_path, {**SoundnessConfigFactory(experiment_id="bad"), "ns": [6]})
    assert main(["soundness", "--config", bad, "--out", str(tmp_path)]) == EXIT_INVALID
    assert "ERROR" in capsys.readouterr().err

    piracy = _write_config(tmp_path, PiracyConfigFactory(experiment_id="mismatch"))
    assert main(["soundness", "--config", piracy, "--out", str(tmp_path)]) == EXIT_INVALID
    assert main(["run", "--out", str(tmp_path)]) == EXIT_INVALID
    assert main(["report", str(tmp_path / "nothing")]) == EXIT_INVALID


@pytest.mark.e2e
def test_piracy_cli_writes_outcome_row(tmp_path, capsys) -> None:
    target = tmp_path / "piracy" / "row.csv"
    status = piracy_main(
        ["run", "--n", "4", "--pirate", "forward-and-pad", "--mode", "exact", "--seed", "3", "--out", str(target)]
    )
    assert status == EXIT_OK
    row = pd.read_csv(target).iloc[0]
    assert row["pirate"] == "forward-and-pad"
    assert row["joint_accept"] == pytest.approx(0.25)
    assert "[OK] wrote" in capsys.readouterr().out


@pytest.mark.e2e
def test_piracy_cli_rejects_unknown_verifier(capsys) -> None:
    status = piracy_main(["run", "--n", "4", "--pirate", "forward-and-pad", "--v1", "nobody", "--mode", "exact"])
    assert status == EXIT_INVALID
    err = capsys.readouterr().err
    assert "ERROR" in err
    assert "invalid_input" in err
    assert "piracy run" in err


@pytest.mark.e2e
def test_calculus_cli_pipeline(tmp_path, capsys) -> None:
    target = tmp_path / "pipeline.json"
    status = calculus_main(
        ["pipeline", "--preset", "perfect", "--q", "2", "--ell1", "1", "--ell2", "1", "--out", str(target)]
    )
    assert status == EXIT_OK
    report = json.loads(target.read_text())
    assert [stage["stage"] for stage in report["stages"]] == [
        "amplify_gap",
        "product_test_collapse",
        "sequential_repeat",
        "drop_unentanglement",
    ]
    assert report["pass"] is True
    assert "amplify_gap" in capsys.readouterr().out


@pytest.mark.e2e
def test_calculus_cli_rejects_oversized_verifier(capsys) -> None:
    assert calculus_main(["pipeline", "--preset", "projective", "--k", "4"]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "ERROR" in err
    assert "invalid_input" in err
    assert "calculus pipeline" in err
