import csv
import io
import json
import math
import xml.etree.ElementTree as ET

import pytest

from l1interp import cli
from l1interp import risk_curve as rc
from l1interp.special import Phi_inv

MODEL = ["--eps", "0.01", "--snr", "2", "--sigma", "1"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def assert_svg(path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    text = path.read_text()
    assert "href" not in text and "<image" not in text


class TestSolve:
    def test_small_delta(self, capsys):
        code, out, _ = run(capsys, "solve", "--delta", "0.001", "--eps", "0.3", "--snr", "10",
                           "--sigma", "1")
        assert code == 0
        r = rows(out)[0]
        assert r["branch"] == "interpolator"
        assert float(r["tau_sq"]) > 11.0

    def test_ols_branch(self, capsys):
        code, out, err = run(capsys, "solve", "--delta", "2.0", *MODEL)
        assert code == 0 and "least-squares" in err
        assert float(rows(out)[0]["tau_sq"]) == 2.0

    def test_lasso_level(self, capsys):
        code, out, _ = run(capsys, "solve", "--delta", "0.5", *MODEL, "--lam", "0.5")
        assert code == 0 and rows(out)[0]["branch"] == "lasso"

    def test_missing_sigma(self, capsys):
        code, _, _ = run(capsys, "solve", "--delta", "0.5", "--eps", "0.1", "--snr", "2")
        assert code == 2

    def test_bad_values(self, capsys):
        assert run(capsys, "solve", "--delta", "1", *MODEL)[0] == 2
        assert run(capsys, "solve", "--delta", "0.5", "--eps", "2", "--snr", "2",
                   "--sigma", "1")[0] == 2
        assert run(capsys, "solve", "--delta", "0.5", "--eps", "0.1", "--sigma", "1")[0] == 2
        assert run(capsys, "frobnicate")[0] == 2

    def test_json_and_global_flags_before_command(self, capsys, tmp_path):
        out_file = tmp_path / "s.json"
        code, out, _ = run(capsys, "--format", "json", "--out", str(out_file), "solve",
                           "--delta", "0.3", *MODEL)
        assert code == 0 and out == ""
        data = json.loads(out_file.read_text())
        assert data[0]["delta"] == 0.3

    def test_io_failure(self, capsys, tmp_path):
        code, _, _ = run(capsys, "solve", "--delta", "0.3", *MODEL, "--out",
                         str(tmp_path / "missing" / "x.csv"))
        assert code == 1


class TestLasso:
    def test_levels(self, capsys):
        code, out, _ = run(capsys, "lasso", "--delta", "0.4", *MODEL, "--lam", "0.1,1,3")
        assert code == 0
        data = rows(out)
        assert [float(r["lambda"]) for r in data] == [0.1, 1.0, 3.0]
        assert all(float(r["tau_sq"]) > 1.0 for r in data)

    def test_rejects_delta(self, capsys):
        assert run(capsys, "lasso", "--delta", "1.5", *MODEL, "--lam", "0.1")[0] == 2


class TestSweep:
    def test_full_grid_with_svg(self, capsys, tmp_path):
        svg = tmp_path / "fig.svg"
        code, out, _ = run(capsys, "sweep", *MODEL, "--grid-log", "1.01:100:400", "--svg",
                           str(svg))
        assert code == 0
        data = rows(out)
        assert len(data) == 400 and tuple(data[0]) == rc.CSV_HEADER
        regimes = [r["regime"] for r in data]
        assert sum(a != b for a, b in zip(regimes, regimes[1:])) >= 2
        assert_svg(svg)

    def test_replay_identical(self, capsys):
        a = run(capsys, "sweep", *MODEL, "--grid-log", "2:50:30")[1]
        b = run(capsys, "sweep", *MODEL, "--grid-log", "2:50:30", "--workers", "2")[1]
        assert a == b

    def test_bad_grid(self, capsys):
        assert run(capsys, "sweep", *MODEL, "--grid-log", "0.5:50:30")[0] == 2
        assert run(capsys, "sweep", *MODEL, "--grid-log", "5:2:3")[0] == 2
        assert run(capsys, "sweep", *MODEL, "--workers", "0")[0] == 2


class TestLimits:
    def test_half(self, capsys):
        code, out, err = run(capsys, "limits", "--delta", "0.5")
        assert code == 0
        r = rows(out)[0]
        assert float(r["H"]) == pytest.approx(rc.H_fn(0.5), rel=1e-15)
        assert float(r["alpha0"]) == pytest.approx(-Phi_inv(0.25), rel=1e-15)
        assert float(r["tau0_sq"]) == pytest.approx(3.0)
        assert "H =" in err

    def test_over_determined(self, capsys):
        code, out, _ = run(capsys, "limits", "--delta", "2", "--sigma", "1")
        assert code == 0 and float(rows(out)[0]["ols"]) == 2.0


class TestAmp:
    def test_trace_and_replay(self, capsys, tmp_path):
        argv = ["amp", "--n", "40", "--p", "120", "--eps", "0.1", "--snr", "2", "--sigma", "1",
                "--max-iter", "30", "--lam-stop", "0.2", "--compare-bp"]
        code, out, err = run(capsys, *argv, "--svg", str(tmp_path / "a.svg"))
        assert code == 0 and "theta_BP" in err
        data = rows(out)
        assert 1 <= len(data) <= 30
        for r in data:
            assert float(r["zeta"]) == float(r["alpha_star_t"]) * float(r["tau_t"])
        assert run(capsys, *argv)[1] == out
        assert_svg(tmp_path / "a.svg")

    def test_rejects_shape(self, capsys):
        assert run(capsys, "amp", "--n", "50", "--p", "40", *MODEL)[0] == 2


class TestSimulate:
    def test_small_run(self, capsys, tmp_path):
        argv = ["simulate", "--n", "30", "--trials", "3", "--eps", "0.05", "--snr", "4",
                "--sigma", "1", "--grid-log", "0.5:8:4"]
        code, out, _ = run(capsys, *argv, "--svg", str(tmp_path / "s.svg"))
        assert code == 0
        data = rows(out)
        assert len(data) == 4 and all(int(r["trials"]) == 3 for r in data)
        assert all(math.isfinite(float(r["mean_risk"])) for r in data)
        assert run(capsys, *argv, "--workers", "2")[1] == out
        assert_svg(tmp_path / "s.svg")

    def test_json(self, capsys):
        code, out, _ = run(capsys, "--format", "json", "simulate", "--n", "20", "--trials", "2",
                           *MODEL, "--ratios", "2")
        assert code == 0 and json.loads(out)[0]["p"] == 40

    def test_requires_grid(self, capsys):
        assert run(capsys, "simulate", *MODEL)[0] == 2
        assert run(capsys, "simulate", *MODEL, "--ratios", "2", "--solver", "lasso-cd")[0] == 2


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "l1interp", "limits", "--delta", "0.5"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout.startswith("delta,")
