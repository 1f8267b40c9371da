import shutil
import subprocess

import numpy as np
import pytest
from scipy.stats import spearmanr

from smisense import cli
from smisense.config import load_config
from smisense.io import read_csv, read_precoder

FAST = "[run]\nn_trials = 200\n"


@pytest.fixture(autouse=True)
def no_env_dir(monkeypatch):
    monkeypatch.delenv(cli.OUTPUT_DIR_ENV, raising=False)


def config(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run_csv(tmp_path, argv, name="out.csv"):
    out = tmp_path / name
    assert cli.main(argv + ["--out", str(out)]) == cli.EXIT_OK
    return read_csv(out), out.read_text()


def floats(rows, col):
    return np.array([float(r[col]) for r in rows])


class TestEval:
    def test_single_row_ordering(self, tmp_path):
        rows, _ = run_csv(tmp_path, ["eval", "--config", config(tmp_path, FAST)])
        assert len(rows) == 1
        r = {k: float(v) for k, v in rows[0].items() if v}
        assert r["smi_lower"] <= r["smi_asymptotic"] <= r["smi_upper"]
        assert (r["dof_lower"], r["dof_upper"]) == (13, 16)
        assert r["wall_time_ms"] == 0

    def test_zero_power(self, tmp_path):
        rows, _ = run_csv(tmp_path, ["eval", "--config",
                                     config(tmp_path, FAST + "precoder_scale = 0\n")])
        for col in ("smi_asymptotic", "smi_upper", "smi_lower", "smi_mc_mean", "smi_mc_stderr"):
            assert float(rows[0][col]) == 0.0

    def test_full_scale_profile_runs(self, tmp_path):
        rows, _ = run_csv(tmp_path, ["eval", "--profile", "paper", "--config",
                                     config(tmp_path, FAST)])
        r = rows[0]
        assert float(r["smi_lower"]) <= float(r["smi_asymptotic"]) <= float(r["smi_upper"])
        assert float(r["smi_mc_mean"]) > 0

    def test_bits(self, tmp_path):
        cfg = config(tmp_path, FAST)
        nats, _ = run_csv(tmp_path, ["eval", "--config", cfg], "n.csv")
        bits, _ = run_csv(tmp_path, ["eval", "--config", cfg, "--units", "bits"], "b.csv")
        for col in ("smi_asymptotic", "smi_upper", "smi_mc_mean"):
            assert float(bits[0][col]) == pytest.approx(float(nats[0][col]) / np.log(2),
                                                        rel=1e-11)
        assert bits[0]["dof_lower"] == nats[0]["dof_lower"]

    def test_stdout_without_out(self, tmp_path, capsys):
        assert cli.main(["eval", "--config", config(tmp_path, FAST)]) == 0
        assert capsys.readouterr().out.startswith(",".join(cli.SWEEP_COLUMNS))

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "results"))
        assert cli.main(["eval", "--config", config(tmp_path, FAST)]) == 0
        assert (tmp_path / "results" / "eval.csv").is_file()
        assert cli.main(["eval", "--config", config(tmp_path, FAST), "--out", "x.csv"]) == 0
        assert (tmp_path / "results" / "x.csv").is_file()

    def test_timing_column(self, tmp_path):
        rows, _ = run_csv(tmp_path, ["eval", "--config", config(tmp_path, FAST), "--timing"])
        assert float(rows[0]["wall_time_ms"]) > 0

    def test_save_config_reproduces(self, tmp_path):
        saved = tmp_path / "resolved.ini"
        _, a = run_csv(tmp_path, ["eval", "--config", config(tmp_path, FAST), "--seed", "9",
                                  "--save-config", str(saved)], "a.csv")
        _, b = run_csv(tmp_path, ["eval", "--config", str(saved)], "b.csv")
        assert a == b


class TestExitCodes:
    def test_config_error(self, tmp_path, capsys):
        code = cli.main(["eval", "--config", config(tmp_path, "[run]\nwhat = 1\n")])
        assert code == cli.EXIT_CONFIG
        assert "c.ini:2" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert cli.main(["eval", "--config", str(tmp_path / "none.ini")]) == cli.EXIT_CONFIG

    def test_numerical_failure(self, tmp_path, capsys):
        cfg = config(tmp_path, FAST + "precoder_scale = 1e300\n")
        with np.errstate(all="ignore"):
            code = cli.main(["eval", "--config", cfg])
        assert code == cli.EXIT_NUMERIC
        assert "numerical failure" in capsys.readouterr().err

    def test_ordering_violation_is_numerical(self):
        row = cli.SweepRow(1, 2.0, 1.0, 0.5, 1.0, 0.0, 1, 2)
        with pytest.raises(cli.NumericalFailure):
            row.check_order()

    @pytest.mark.skipif(shutil.which("smi") is None, reason="console script not installed")
    def test_console_script(self, tmp_path):
        res = subprocess.run(["smi", "eval", "--config", config(tmp_path, "[run]\nbad\n")],
                             capture_output=True, text=True)
        assert res.returncode == 1
        assert "config error" in res.stderr


class TestSweeps:
    def test_fig1(self, tmp_path):
        rows, _ = run_csv(tmp_path, ["fig1"])
        assert floats(rows, "sweep_value").tolist() == [4, 8, 16, 32, 64]
        ub = floats(rows, "smi_upper")
        np.testing.assert_allclose(ub, ub[0], rtol=1e-11)
        theo = floats(rows, "smi_asymptotic")
        assert np.all(np.diff(theo) >= 0)
        mc = floats(rows, "smi_mc_mean")
        assert np.all(np.abs(theo - mc) / mc <= 0.03)
        assert np.all(floats(rows, "smi_lower") <= theo)

    def test_fig2(self, tmp_path):
        rows, _ = run_csv(tmp_path, ["fig2", "--config", config(tmp_path, FAST)])
        k = floats(rows, "sweep_value")
        assert k.tolist() == [1, 2, 3, 4, 5, 6, 7]
        ub, theo = floats(rows, "smi_upper"), floats(rows, "smi_asymptotic")
        gap = (ub - theo) / ub
        assert np.all(gap[1:] > gap[0])
        assert spearmanr(k, gap)[0] >= 0.9
        assert np.all(floats(rows, "smi_lower") <= theo + 1e-9 * ub)

    def test_fig2_gap_grows_on_average(self):
        gaps = []
        for seed in range(8):
            cfg = load_config(None, "desk", "fig2")
            cfg.targets.seed, cfg.run.n_trials = seed, 2000
            rows, _ = cli.cmd_fig2(cfg)
            ub = np.array([r["smi_upper"] for r in rows])
            mc = np.array([r["smi_mc_mean"] for r in rows])
            gaps.append((ub - mc) / ub)
        assert np.all(np.diff(np.mean(gaps, axis=0)) > 0)

    def test_fig2_single_target_gap_smallest(self, tmp_path):
        text = "[scenario]\nn_tx = 16\nn_rx = 8\n" + FAST + "grid = 1, 16\n"
        rows, _ = run_csv(tmp_path, ["fig2", "--config", config(tmp_path, text)])
        ub, theo = floats(rows, "smi_upper"), floats(rows, "smi_asymptotic")
        gap = (ub - theo) / ub
        assert gap[0] <= gap[1]

    def test_fig3_small(self, tmp_path):
        text = ("[scenario]\nn_tx = 6\nn_rx = 3\nn_targets = 3\nn_frames = 8\n"
                "[run]\nn_trials = 100\ngrid = 0, 20\nmax_iters = 15\n")
        rows, _ = run_csv(tmp_path, ["fig3", "--config", config(tmp_path, text)])
        assert [(r["sweep_value"], r["arm"]) for r in rows] == [
            ("0", "proposed"), ("0", "baseline"), ("20", "proposed"), ("20", "baseline")]
        for r in rows:
            assert int(r["iterations"]) <= 15
            assert r["termination"] in ("gradient-tolerance", "max-iters", "line-search-failure")
        theo = floats(rows, "smi_asymptotic")
        assert theo[0] >= theo[1] - 1e-6 and theo[2] >= theo[3] - 1e-6

    def test_jobs_do_not_change_output(self, tmp_path):
        text = FAST + "grid = 4, 8, 16\n"
        _, a = run_csv(tmp_path, ["fig1", "--config", config(tmp_path, text)], "a.csv")
        _, b = run_csv(tmp_path, ["fig1", "--config", config(tmp_path, text), "--jobs", "3"],
                       "b.csv")
        assert a == b

    def test_seed_changes_monte_carlo_only(self, tmp_path):
        cfg = config(tmp_path, FAST + "grid = 4, 8\n")
        a, _ = run_csv(tmp_path, ["fig1", "--config", cfg, "--seed", "1"], "a.csv")
        b, _ = run_csv(tmp_path, ["fig1", "--config", cfg, "--seed", "2"], "b.csv")
        assert [r["smi_asymptotic"] for r in a] == [r["smi_asymptotic"] for r in b]
        assert [r["smi_mc_mean"] for r in a] != [r["smi_mc_mean"] for r in b]


class TestOptimize:
    def test_trace_and_precoder(self, tmp_path):
        out = tmp_path / "opt.csv"
        argv = ["optimize", "--config", config(tmp_path, "[run]\nmax_iters = 10\n"),
                "--out", str(out)]
        assert cli.main(argv) == 0
        rows = read_csv(out)
        assert [int(r["iter"]) for r in rows] == list(range(len(rows)))
        assert np.all(np.diff(floats(rows, "objective")) >= 0)
        f = read_precoder(tmp_path / "opt.precoder.txt")
        assert f.shape == (8, 3)
        assert np.vdot(f, f).real == pytest.approx(1.0, rel=1e-9)

        first = (out.read_text(), (tmp_path / "opt.precoder.txt").read_bytes())
        assert cli.main(argv) == 0
        assert (out.read_text(), (tmp_path / "opt.precoder.txt").read_bytes()) == first
