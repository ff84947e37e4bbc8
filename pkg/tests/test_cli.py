"""CLI behavior and exit codes, plus metrics CSV round-tripping."""

import numpy as np

from byzlab.sim import metrics as metrics_mod
from byzlab.sim.cli import main
from byzlab.sim.config import config_from_dict
from byzlab.sim.engine import Simulation


def _write_config(tmp_path, text):
    path = tmp_path / "scenario.yaml"
    path.write_text(text)
    return str(path)


MINIMAL = """
run:
  rounds: 2
  sample_size: 3
population:
  honest: 5
  adversaries: 0
data:
  samples: 600
  eval_samples: 200
"""


def test_run_command(tmp_path, capsys):
    config = _write_config(tmp_path, MINIMAL)
    out = tmp_path / "out"
    code = main(["run", "--config", config, "--out", str(out)])
    assert code == 0
    assert (out / "metrics.csv").exists()
    assert (out / "effective_config.yaml").exists()
    assert (out / "summary.json").exists()
    assert "run complete" in capsys.readouterr().out


def test_run_rerun_is_byte_identical(tmp_path):
    config = _write_config(tmp_path, MINIMAL)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--config", config, "--out", str(out)]) == 0
        outs.append((out / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]


def test_seed_override_changes_output(tmp_path):
    config = _write_config(tmp_path, MINIMAL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", config, "--out", str(a), "--seed", "5"]) == 0
    assert main(["run", "--config", config, "--out", str(b), "--seed", "6"]) == 0
    assert (a / "metrics.csv").read_bytes() != (b / "metrics.csv").read_bytes()


def test_config_error_exit_code(tmp_path, capsys):
    config = _write_config(tmp_path, "aggregator:\n  kind: nosuch\n")
    assert main(["run", "--config", config]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_list_commands(capsys):
    assert main(["list-aggregators"]) == 0
    out = capsys.readouterr().out
    assert "multi_krum" in out and "foolsgold" in out
    assert main(["list-attacks"]) == 0
    out = capsys.readouterr().out
    assert "sybil_tail" in out and "fixed_frequency" in out


def test_sweep_command(tmp_path):
    config = _write_config(tmp_path, MINIMAL)
    out = tmp_path / "sweep"
    code = main([
        "sweep", "--config", config, "--param", "training.lr",
        "--values", "0.1,0.5", "--out", str(out),
    ])
    assert code == 0
    assert (out / "training.lr=0.1" / "metrics.csv").exists()
    assert (out / "training.lr=0.5" / "metrics.csv").exists()
    echo = (out / "training.lr=0.1" / "effective_config.yaml").read_text()
    assert "lr: 0.1" in echo


def test_verify_transcript_command(tmp_path, capsys):
    config = _write_config(
        tmp_path,
        MINIMAL
        + "output:\n  write_transcripts: true\n",
    )
    out = tmp_path / "crypto"
    assert main([
        "run", "--config", config, "--out", str(out), "--mode", "crypto",
    ]) == 0
    transcripts = sorted((out / "transcripts").glob("round_*.json"))
    assert transcripts
    assert main(["verify-transcript", str(transcripts[0])]) == 0
    assert "verified" in capsys.readouterr().out


def test_metrics_roundtrip(tmp_path):
    config = config_from_dict({
        "run": {"rounds": 3, "sample_size": 3},
        "population": {"honest": 5, "adversaries": 0},
        "data": {"samples": 600, "eval_samples": 200},
    })
    result = Simulation(config).run()
    path = tmp_path / "metrics.csv"
    metrics_mod.write_metrics(result.records, path)
    rows = metrics_mod.read_metrics(path)
    assert len(rows) == 3
    for row, rec in zip(rows, result.records):
        assert row["round"] == rec.round_index
        assert row["main_acc"] == float(f"{rec.main_accuracy:.6f}")
        assert row["checksum"] == rec.checksum
        assert row["n_sampled"] == len(rec.sampled)
        assert row["aborted"] == rec.aborted


def test_metrics_empty_records(tmp_path):
    path = tmp_path / "empty.csv"
    metrics_mod.write_metrics([], path)
    text = path.read_text().splitlines()
    assert len(text) == 1
    assert text[0].startswith("round,main_acc")
    assert metrics_mod.read_metrics(path) == []
