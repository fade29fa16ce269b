import json

import pytest

from majdyn import experiments as ex
from majdyn.cli import main
from majdyn.graphs import complete, cycle, load_graph, save_graph


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_writes_edge_list(capsys, tmp_path):
    path = tmp_path / "c.txt"
    code, _, _ = run_cli(capsys, "--out", str(path), "gen", "cycle:6")
    assert code == 0 and load_graph(path) == cycle(6)


def test_sim_json_and_flags_after_subcommand(capsys):
    code, out, _ = run_cli(capsys, "sim", "--family", "complete:5", "--delta", "0.1",
                           "--trials", "50", "--seed", "3")
    doc = json.loads(out)
    assert code == 0 and doc["config"]["seed"] == 3
    assert doc["estimates"]["p_consensus"]["point"] == 1.0


def test_sim_csv_with_checkpoints(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, _, _ = run_cli(capsys, "--format", "csv", "--out", str(out), "sim", "--family", "cycle:8",
                         "--delta", "0.2", "--trials", "4", "--checkpoints", "0,3")
    assert code == 0
    assert len(out.read_text().splitlines()) == 5
    assert len((tmp_path / "s.checkpoints.csv").read_text().splitlines()) == 9


def test_spectral_from_file(capsys, tmp_path):
    path = tmp_path / "k4.txt"
    save_graph(complete(4), path)
    code, out, _ = run_cli(capsys, "spectral", "--graph", str(path), "--json")
    assert code == 0 and json.loads(out)["lambda"] == pytest.approx(1 / 3)


def test_mix_check(capsys):
    code, out, _ = run_cli(capsys, "mix-check", "--family", "random_regular:60,3,1", "--samples", "50")
    assert code == 0 and json.loads(out)["failed"] == 0


def test_oracle_and_expected_volume(capsys):
    code, out, _ = run_cli(capsys, "oracle", "--family", "complete:2", "--delta", "0.1")
    assert code == 0 and json.loads(out)["p_red_consensus"] == pytest.approx(0.6)
    code, out, _ = run_cli(capsys, "oracle", "--family", "cycle:4", "--delta", "0.2",
                           "--expected-red-volume", "4")
    assert json.loads(out)["expected_red_volume"] == pytest.approx(5.6525)


def test_walk(capsys):
    code, out, _ = run_cli(capsys, "walk", "--kind", "pm1", "--d", "1", "--p", "0.5", "--x", "20",
                           "--trials", "2000")
    doc = json.loads(out)
    assert code == 0 and doc["within_bound"] and doc["estimate"]["trials"] == 2000


def test_suite_exit_codes(capsys, monkeypatch):
    code, out, err = run_cli(capsys, "suite", "complete", "--trials", "300")
    assert code == 0 and "[PASS]" in err and json.loads(out)["passed"]

    def failing(**kw):
        return ex.SuiteReport("star", kw, [ex.Check("always fails", False, 0.0, 1.0)])

    monkeypatch.setitem(ex.SUITES, "star", failing)
    code, out, err = run_cli(capsys, "suite", "star", "--trials", "20")
    assert code == 1 and "[FAIL] always fails" in err


def test_errors_exit_2(capsys):
    code, _, err = run_cli(capsys, "gen", "cycle:2")
    assert code == 2 and "error" in err
    code, _, err = run_cli(capsys, "oracle", "--family", "cycle:9", "--delta", "0.1")
    assert code == 2
