"""CLI contract tests: subcommands, outputs, exit codes."""

import json

import pytest

from steadyarm import cli, fixtures
from steadyarm.reference import save_recording


@pytest.fixture()
def short_recording(tmp_path):
    path = tmp_path / "short.jsonl"
    save_recording(path, fixtures.aggressive_recording(duration=0.5))
    return path


def test_replay_happy_path_writes_outputs(short_recording, tmp_path, capsys):
    out = tmp_path / "out"
    rc = cli.main(["replay", "--params", "P2", "--recording",
                   str(short_recording), "--out", str(out)])
    assert rc == 0
    assert (out / "short_P2_log.csv").exists()
    assert (out / "short_P2_log.jsonl").exists()
    m = json.loads((out / "short_P2_metrics.json").read_text())
    assert m["cycles"] == 10
    assert "lateral mean" in capsys.readouterr().out


def test_replay_missing_recording_exit_2_names_path(tmp_path, capsys):
    rc = cli.main(["replay", "--recording", str(tmp_path / "absent.jsonl")])
    assert rc == 2
    assert "absent.jsonl" in capsys.readouterr().err


def test_replay_empty_recording_succeeds(tmp_path):
    rec = tmp_path / "empty.jsonl"
    rec.write_text("")
    rc = cli.main(["replay", "--recording", str(rec), "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "empty_P2_log.csv").exists()


def test_replay_malformed_recording_exit_2_with_line(tmp_path, capsys):
    rec = tmp_path / "bad.jsonl"
    rec.write_text('{"t": 0.0, "p": [0, 0], "quat": [1, 0, 0, 0]}\n')
    rc = cli.main(["replay", "--recording", str(rec), "--out", str(tmp_path)])
    assert rc == 2
    assert "line 1" in capsys.readouterr().err


def test_bad_params_name_exit_2(short_recording, tmp_path, capsys):
    rc = cli.main(["replay", "--params", "NOPE", "--recording",
                   str(short_recording), "--out", str(tmp_path)])
    assert rc == 2
    assert "NOPE" in capsys.readouterr().err


def test_bench_single_cycle_mean_equals_max(tmp_path):
    rc = cli.main(["bench", "--cycles", "1", "--out", str(tmp_path)])
    assert rc == 0
    rep = json.loads((tmp_path / "bench_P2.json").read_text())
    assert rep["cycles"] == 1
    assert rep["solve_ms"]["mean"] == pytest.approx(rep["solve_ms"]["max"])
    assert rep["solve_ms"]["p99"] == pytest.approx(rep["solve_ms"]["max"])


def test_bench_rejects_zero_cycles(tmp_path, capsys):
    rc = cli.main(["bench", "--cycles", "0", "--out", str(tmp_path)])
    assert rc == 2
    assert "cycles" in capsys.readouterr().err


def test_bench_deterministic_iterations_given_seed(tmp_path):
    for d in ("a", "b"):
        rc = cli.main(["bench", "--cycles", "6", "--seed", "42",
                       "--out", str(tmp_path / d)])
        assert rc == 0
    rep_a = json.loads((tmp_path / "a" / "bench_P2.json").read_text())
    rep_b = json.loads((tmp_path / "b" / "bench_P2.json").read_text())
    assert rep_a["iterations"]["per_cycle"] == rep_b["iterations"]["per_cycle"]


def test_compare_csv_has_nine_columns(short_recording, tmp_path):
    rc = cli.main(["compare", "P1", "P2", "--recording", str(short_recording),
                   "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "compare_P1_P2.csv").read_text().strip().splitlines()
    assert lines[0].split(",") == [
        "t", "ref_y", "ref_roll", "P1_y", "P1_roll", "P1_lateral",
        "P2_y", "P2_roll", "P2_lateral"]
    assert all(len(l.split(",")) == 9 for l in lines)
    assert len(lines) == 1 + 10


def test_compare_same_params_identical_series(short_recording, tmp_path, capsys):
    rc = cli.main(["compare", "P1", "P1", "--recording", str(short_recording),
                   "--out", str(tmp_path)])
    assert rc == 0
    assert "identical parameter sets" in capsys.readouterr().out
    lines = (tmp_path / "compare_P1_P1.csv").read_text().strip().splitlines()
    for line in lines[1:]:
        cols = line.split(",")
        assert cols[3:6] == cols[6:9]


def test_internal_invariant_breach_exit_3(short_recording, tmp_path,
                                          monkeypatch, capsys):
    def bad_check(log, duration):
        raise RuntimeError("induced invariant breach")

    monkeypatch.setattr(cli, "_check_log_invariants", bad_check)
    rc = cli.main(["replay", "--recording", str(short_recording),
                   "--out", str(tmp_path)])
    assert rc == 3
    assert "internal error" in capsys.readouterr().err


def test_no_command_prints_help(capsys):
    rc = cli.main([])
    assert rc == 2
    assert "replay" in capsys.readouterr().out


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["bench", "--bogus"])
    assert exc.value.code == 2
