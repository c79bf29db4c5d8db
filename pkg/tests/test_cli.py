import json
import subprocess
import sys

import pytest

from typik import cli
from typik.cli import execute, main, parse_args
from typik.errors import OptimizationError, UsageError

PHI = "12.649110640673518"


@pytest.fixture
def pairs(tmp_path):
    p = tmp_path / "pairs.csv"
    p.write_text("0,2\n1,3\n")
    return p


@pytest.fixture
def vector(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("\n".join(["1.5"] * 10) + "\n")
    return p


class TestParse:
    def test_happy_path(self, vector):
        inv = parse_args(["fit", "--model", "stein", "--data", str(vector), "--lambda", "10", "--seed", "42"])
        assert inv.subcommand == "fit" and inv.model == "stein" and inv.lam == 10.0 and inv.seed == 42
        assert inv.mc_samples == 1000

    def test_contour_needs_data(self):
        with pytest.raises(UsageError):
            parse_args(["contour", "--model", "lecam"])

    @pytest.mark.parametrize(
        "argv",
        [
            ["fit", "--model", "stein", "--true", "3", "--lambda", "-1"],
            ["fit", "--model", "stein", "--true", "3", "--bogus"],
            ["fit", "--model", "nope", "--true", "3"],
            ["fit", "--true", "3"],
            ["fit", "--model", "stein", "--true", "x"],
            ["fit", "--model", "stein", "--true", "3", "--seed", "-1"],
            ["fit", "--model", "stein", "--true", "3", "--seed", str(2**64)],
            ["fit", "--model", "stein", "--true", "3", "--mc-samples", "0"],
            ["fit", "--model", "stein", "--true", "3", "--grid", "0:1"],
            ["fit", "--model", "stein", "--true", "3", "--gof", "ks-full"],
            ["contour", "--model", "lecam", "--true", "1,2", "--method", "exact"],
            ["confidence", "--model", "stein", "--true", "3", "--alpha", "1.5"],
            ["simulate", "nope"],
            ["simulate", "ns_bias", "--lambda", "-2"],
            ["reproduce", "nope"],
            [],
        ],
    )
    def test_usage_errors(self, argv):
        with pytest.raises(UsageError):
            parse_args(argv)
        assert main(argv) == 1

    def test_seed_bounds_and_env(self, monkeypatch):
        inv = parse_args(["reproduce", "ns_objective", "--seed", str(2**64 - 1)])
        assert inv.seed == 2**64 - 1
        monkeypatch.setenv("TYPIK_SEED", "77")
        assert parse_args(["reproduce", "ns_objective"]).seed == 77
        assert parse_args(["reproduce", "ns_objective", "--seed", "3"]).seed == 3
        monkeypatch.setenv("TYPIK_SEED", "abc")
        with pytest.raises(UsageError):
            parse_args(["reproduce", "ns_objective"])

    def test_grid_and_lists(self):
        inv = parse_args(
            ["confidence", "--model", "lecam", "--true", "1,2", "--grid", "-1:3:5", "--grid", "0.1:10:7:log", "--alpha", "0.05", "--alpha", "0.1"]
        )
        assert len(inv.grid) == 2 and inv.grid[1].scale == "log" and inv.alphas == (0.05, 0.1)
        assert inv.true == (1.0, 2.0)
        neg = parse_args(["fit", "--model", "lecam", "--true", "-0.5,2"])
        assert neg.true == (-0.5, 2.0)
        sim = parse_args(["simulate", "ns_bias", "--lambda", "0", "--lambda", "4", "--reps", "3"])
        assert sim.lambdas == (0.0, 4.0) and sim.reps == 3 and sim.target == "ns_bias"


class TestExecute:
    def test_fit_pairs(self, pairs, capsys):
        assert main(["fit", "--model", "neyman_scott", "--lambda", "0", "--data", str(pairs)]) == 0
        header, row = capsys.readouterr().out.strip().splitlines()
        assert header == "sigma2,objective"
        assert float(row.split(",")[0]) == pytest.approx(1.0, abs=1e-6)

    def test_fit_json_and_sidecar(self, pairs, tmp_path):
        out = tmp_path / "f.json"
        assert main(["fit", "--model", "neyman_scott", "--data", str(pairs), "--format", "json", "--output", str(out)]) == 0
        body = json.loads(out.read_text())
        for key in ("model", "lambda", "M", "seed"):
            assert key in body
        csv_out = tmp_path / "f.csv"
        assert main(["fit", "--model", "neyman_scott", "--data", str(pairs), "--output", str(csv_out)]) == 0
        assert json.loads(csv_out.with_suffix(".json").read_text())["model"] == "neyman_scott"

    def test_missing_file_is_io_error(self, tmp_path, capsys):
        assert main(["fit", "--model", "stein", "--data", str(tmp_path / "none.csv")]) == 2
        assert capsys.readouterr().err.count("\n") == 1

    def test_bad_contents_is_io_error(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2,3\n")
        assert main(["fit", "--model", "neyman_scott", "--data", str(p)]) == 2

    def test_numerical_failure(self, monkeypatch, vector, capsys):
        def boom(*a, **k):
            raise OptimizationError("flat")

        monkeypatch.setattr(cli, "maximize", boom)
        assert main(["fit", "--model", "stein", "--data", str(vector)]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_confidence_stein_exclusion(self, tmp_path):
        out = tmp_path / "c.csv"
        argv = [
            "confidence", "--model", "stein", "--true", PHI, "--seed", "1022", "--lambda", "10",
            "--alpha", "0.05", "--method", "exact", "--contour-grid", "5:25:81", "--output", str(out),
        ]
        assert main(argv) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "alpha,lo,hi"
        ivs = [tuple(map(float, ln.split(",")[1:])) for ln in lines[1:]]
        assert any(lo <= 12.649 <= hi for lo, hi in ivs)
        assert not any(lo <= 16.10 <= hi for lo, hi in ivs)
        side = json.loads(out.with_suffix(".json").read_text())
        assert side["seed"] == 1022 and side["lambda"] == 10.0

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            parse_args(["--version"])
        assert exc.value.code == 0
        assert capsys.readouterr().out.startswith("typik ")

    def test_console_module(self):
        res = subprocess.run([sys.executable, "-m", "typik.cli", "fit"], capture_output=True, text=True)
        assert res.returncode == 1 and "usage error" in res.stderr


def output_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


COMMANDS = {
    "fit": ["fit", "--model", "lecam", "--true", "1,2", "--n", "40", "--lambda", "1", "--output", "{out}/fit.csv"],
    "contour": [
        "contour", "--model", "neyman_scott", "--true", "1", "--n", "30", "--lambda", "4",
        "--mc-samples", "40", "--contour-grid", "0.4:1.6:5", "--output", "{out}/c.csv",
    ],
    "contour_json": [
        "contour", "--model", "stein", "--true", "3", "--n", "20", "--mc-samples", "30",
        "--contour-grid", "0:8:5", "--format", "json", "--output", "{out}/c.json",
    ],
    "confidence": [
        "confidence", "--model", "stein", "--true", "3", "--n", "20", "--lambda", "10", "--mc-samples", "30",
        "--grid", "0:10:41", "--contour-grid", "0:8:5", "--alpha", "0.1", "--output", "{out}/r.csv",
    ],
    "confidence_2d": [
        "confidence", "--model", "lecam", "--true", "1,2", "--n", "20", "--mc-samples", "4",
        "--grid", "-1:3:9", "--grid", "0.2:8:9:log", "--contour-grid", "0:2:2", "--contour-grid", "1:3:2",
        "--format", "json", "--output", "{out}/r.json",
    ],
    "simulate": ["simulate", "validity", "--reps", "3", "--mc-samples", "20", "--lambda", "10", "--output", "{out}"],
    "simulate_json": ["simulate", "ns_bias", "--reps", "3", "--lambda", "2", "--format", "json", "--output", "{out}"],
    "reproduce": ["reproduce", "ns_objective", "--seed", "7", "--output", "{out}"],
    "reproduce_contour": [
        "reproduce", "stein_contour", "--lambda", "10", "--method", "mc", "--mc-samples", "5", "--output", "{out}",
    ],
}


@pytest.mark.parametrize("name", sorted(COMMANDS))
def test_byte_identical_across_runs_and_threads(name, tmp_path):
    outputs = []
    for k, threads in enumerate(("1", "1", "3")):
        out = tmp_path / f"run{k}"
        out.mkdir()
        argv = [a.format(out=out) for a in COMMANDS[name]] + ["--seed", "5", "--threads", threads]
        assert main(argv) == 0, argv
        outputs.append(output_bytes(out))
    assert outputs[0] and outputs[0] == outputs[1] == outputs[2]
