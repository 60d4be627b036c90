import csv
import json
import subprocess
import sys

import jsonschema

from wavefolio.cli import main
from wavefolio.reporting import report_schema

TICKERS = ("AAA", "BBB", "CCC", "DDD")


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _run(config, *args):
    return main([args[0], "--config", str(config), "-q", *args[1:]])


def test_run_all_produces_everything(fixture_run):
    assert _run(fixture_run, "run-all") == 0
    out = fixture_run.parent / "out"
    for t in TICKERS:
        assert (out / "models" / f"{t}.model.json").is_file()
        assert (out / "models" / f"{t}.loss.csv").read_text().startswith("epoch,loss\n")
        assert (out / "predictions" / f"predictions_{t}.csv").is_file()
        assert (out / "report" / f"predictions_{t}.csv").is_file()
    for name in ("trading_metrics.csv", "prediction_metrics.csv", "equity_curve.csv", "report.json", "tables.md"):
        assert (out / "report" / name).is_file()
    assert "| Algorithm | Asset | Annualized Return |" in (out / "report" / "tables.md").read_text()
    jsonschema.validate(json.loads((out / "report" / "report.json").read_text()), report_schema())
    assert not list(out.rglob("*.partial"))


def test_reruns_are_byte_identical(fixture_run, tmp_path):
    assert _run(fixture_run, "run-all", "--out", str(tmp_path / "a")) == 0
    assert _run(fixture_run, "run-all", "--out", str(tmp_path / "b")) == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a.keys() == b.keys() and len(a) > 10
    assert a == b


def test_parallel_jobs_match_sequential(fixture_run, tmp_path):
    assert _run(fixture_run, "run-all", "--out", str(tmp_path / "seq")) == 0
    assert _run(fixture_run, "run-all", "--out", str(tmp_path / "par"), "--jobs", "2") == 0
    assert _tree(tmp_path / "seq") == _tree(tmp_path / "par")


def test_seed_changes_models(fixture_run, tmp_path):
    assert _run(fixture_run, "train", "--out", str(tmp_path / "s0")) == 0
    assert _run(fixture_run, "train", "--out", str(tmp_path / "s1"), "--seed", "1") == 0
    m0 = (tmp_path / "s0" / "models" / "AAA.model.json").read_bytes()
    m1 = (tmp_path / "s1" / "models" / "AAA.model.json").read_bytes()
    assert m0 != m1


def test_predict_rows_and_signals(fixture_run):
    assert _run(fixture_run, "train") == 0
    assert _run(fixture_run, "predict") == 0
    out = fixture_run.parent / "out"
    data = fixture_run.parent / "data"
    for t in TICKERS:
        bars = (data / f"{t}.csv").read_text().splitlines()[1:]
        test_bars = bars[int(0.8 * len(bars)):]
        with open(out / "predictions" / f"predictions_{t}.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(test_bars)
        assert rows[0]["date"] == test_bars[0].split(",")[0]
        assert rows[-1]["date"] == test_bars[-1].split(",")[0]
        # the first prediction is warm-started from the last training bar
        assert float(rows[0]["prev_true"]) == float(bars[len(bars) - len(test_bars) - 1].split(",")[4])
        assert {r["signal"] for r in rows} <= {"1", "-1"}


def test_predict_rerun_is_identical(fixture_run):
    assert _run(fixture_run, "train") == 0
    assert _run(fixture_run, "predict") == 0
    preds = fixture_run.parent / "out" / "predictions"
    first = _tree(preds)
    assert _run(fixture_run, "predict") == 0
    assert _tree(preds) == first


def test_predict_without_models(fixture_run, capsys):
    assert _run(fixture_run, "predict") == 1
    assert "missing model files" in capsys.readouterr().err


def test_corrupted_csv_names_ticker(fixture_run, capsys):
    path = fixture_run.parent / "data" / "CCC.csv"
    lines = path.read_text().splitlines()
    lines[7] = lines[7].replace(",", ",x", 1)
    path.write_text("\n".join(lines) + "\n")
    assert _run(fixture_run, "run-all") == 1
    err = capsys.readouterr().err
    assert "CCC" in err and "line 8" in err
    assert not (fixture_run.parent / "out" / "models").exists()


def test_missing_data_file(fixture_run, capsys):
    (fixture_run.parent / "data" / "DDD.csv").unlink()
    assert _run(fixture_run, "train") == 1
    assert "DDD" in capsys.readouterr().err


def test_backtest_misalignment(fixture_run, capsys):
    assert _run(fixture_run, "train") == 0
    assert _run(fixture_run, "predict") == 0
    path = fixture_run.parent / "out" / "predictions" / "predictions_BBB.csv"
    lines = path.read_text().splitlines()
    del lines[3]
    path.write_text("\n".join(lines) + "\n")
    assert _run(fixture_run, "backtest") == 1
    err = capsys.readouterr().err
    assert "BBB" in err and "row 3" in err
    assert not (fixture_run.parent / "out" / "report").exists()


def test_report_requires_backtest(fixture_run, capsys):
    assert _run(fixture_run, "report") == 1
    assert "run 'backtest' first" in capsys.readouterr().err


def test_config_errors(fixture_run, capsys):
    assert _run(fixture_run, "ingest-check", "--set", "windw=3") == 1
    assert "unknown config keys: windw" in capsys.readouterr().err
    assert _run(fixture_run, "ingest-check", "--set", "split_ratio=1.5") == 1
    assert _run(fixture_run, "ingest-check", "--set", "window=500") == 1
    assert "too short" in capsys.readouterr().err
    bad = fixture_run.parent / "bad.json"
    bad.write_text("{not json")
    assert main(["train", "--config", str(bad), "-q"]) == 1


def test_set_override_is_applied(fixture_run):
    assert _run(fixture_run, "train", "--set", "epochs=1", "--set", "hidden=3") == 0
    saved = json.loads((fixture_run.parent / "out" / "models" / "AAA.model.json").read_text())
    assert saved["config"]["epochs"] == 1 and saved["config"]["hidden"] == 3
    assert len(saved["extra"]["loss_curve"]) == 1


def test_runtime_failure_exit_code(fixture_run):
    blocker = fixture_run.parent / "blocked"
    blocker.write_text("a file where a directory is expected")
    assert _run(fixture_run, "train", "--out", str(blocker)) == 2


def test_module_entry_point(fixture_run):
    proc = subprocess.run([sys.executable, "-m", "wavefolio", "ingest-check", "--config", str(fixture_run)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "AAA" in proc.stderr
