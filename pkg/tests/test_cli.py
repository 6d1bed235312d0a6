import csv
import json

import pytest

from prioloss.cli import main, parse_sweep

PAPER_FLAGS = ["--l1", "1", "--l2", "8", "--m1", "4", "--m2", "20", "--c", "2"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_stability_paper_point(capsys):
    code, out, err = run_cli(capsys, "stability", *PAPER_FLAGS)
    assert code == 0
    doc = json.loads(out)
    assert doc["stable"] is True
    assert doc["lambda_max"] == pytest.approx(35.12195121951219)
    assert "stable" in err


def test_stability_mmc_collapse(capsys):
    code, out, _ = run_cli(capsys, "stability", "--l2", "8", "--m2", "20", "--c", "2")
    assert code == 0
    assert json.loads(out)["lambda_max"] == pytest.approx(40.0)


def test_invalid_params_exit_code(capsys):
    code, _, err = run_cli(capsys, "stability", "--l2", "8", "--m2", "20", "--c", "0")
    assert code == 2
    assert "c" in err


def test_analyze_mm2(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--l2", "8", "--m2", "20", "--c", "2")
    assert code == 0
    doc = json.loads(out)
    assert doc["mean_wait"] == pytest.approx(1 / 480, rel=1e-9)
    assert doc["mean_terminations"] == 0.0


def test_analyze_unstable_exit_code(capsys):
    code, _, err = run_cli(capsys, "analyze", "--l1", "1", "--l2", "40",
                           "--m1", "4", "--m2", "20", "--c", "2")
    assert code == 3
    assert "unstable" in err.lower()


def test_analyze_dump_matrices(capsys, tmp_path):
    mdir = tmp_path / "mats"
    code, _, _ = run_cli(capsys, "analyze", *PAPER_FLAGS,
                         "--dump-matrices", str(mdir))
    assert code == 0
    names = {p.name for p in mdir.iterdir()}
    assert {"C.csv", "A1.csv", "A2.csv", "B0.csv", "B1.csv", "B2.csv", "R.csv"} <= names


def test_simulate_writes_report_histogram_and_figure(capsys, tmp_path):
    out = tmp_path / "sim.json"
    code, _, _ = run_cli(capsys, "simulate", *PAPER_FLAGS,
                         "--horizon", "5000", "--reps", "2", "--seed", "5",
                         "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["throughput"]["value"] > 0
    hist = (tmp_path / "sim_histogram.csv").read_text().splitlines()
    assert hist[0] == "k,probability"
    assert (tmp_path / "sim_histogram.png").stat().st_size > 0


def test_simulate_seed_repeat_identical(capsys, tmp_path):
    outputs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        code, _, _ = run_cli(capsys, "simulate", *PAPER_FLAGS,
                             "--horizon", "2000", "--reps", "2", "--seed", "9",
                             "--no-plot", "--out", str(out))
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_parse_sweep_forms():
    assert parse_sweep("l1:0:2:0.5") == ("l1", (0.0, 0.5, 1.0, 1.5, 2.0))
    assert parse_sweep("l2:5,10,20") == ("l2", (5.0, 10.0, 20.0))
    assert parse_sweep("c:2,5") == ("c", (2, 5))
    from prioloss.model import InvalidParams
    with pytest.raises(InvalidParams):
        parse_sweep("mu1:0:1:0.5")
    with pytest.raises(InvalidParams):
        parse_sweep("l1:1:0:-1")


def test_sweep_analytic_csv_and_figure(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, _, _ = run_cli(capsys, "sweep", "--l1", "1", "--m1", "4",
                         "--m2", "20", "--c", "2",
                         "--sweep", "l2:8,20,40", "--mode", "analytic",
                         "--out", str(out))
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert [r["value"] for r in rows] == ["8.0", "20.0", "40.0"]
    assert rows[0]["stable"] == "1" and rows[2]["stable"] == "0"
    # unstable grid points carry sentinels, not aborts
    assert rows[2]["mean_wait"] == "unstable"
    # throughput clips at lambda_max above the threshold
    assert float(rows[2]["throughput"]) == pytest.approx(35.12195121951219)
    assert (tmp_path / "sweep.png").stat().st_size > 0


def test_sweep_both_modes_agree(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, _, _ = run_cli(capsys, "sweep", *PAPER_FLAGS,
                         "--sweep", "l1:1:2:1", "--mode", "both",
                         "--horizon", "20000", "--reps", "3", "--seed", "2",
                         "--no-plot", "--out", str(out))
    assert code == 0
    for row in csv.DictReader(out.read_text().splitlines()):
        diff = abs(float(row["mean_wait"]) - float(row["mean_wait_sim"]))
        assert diff <= 3 * float(row["mean_wait_sim_hw"])


def test_config_file_with_flag_override(capsys, tmp_path):
    conf = tmp_path / "model.conf"
    conf.write_text("l1 = 1\nl2 = 8\nm1 = 4\nm2 = 20\nc = 2\n# comment\n")
    code, out, _ = run_cli(capsys, "stability", "--config", str(conf))
    assert code == 0
    assert json.loads(out)["stable"] is True
    # flag overrides the file value
    code, out, _ = run_cli(capsys, "stability", "--config", str(conf),
                           "--l2", "40")
    assert code == 0
    assert json.loads(out)["stable"] is False
