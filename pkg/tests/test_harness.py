import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fhawkes.errors import ConfigurationError, MetricError
from fhawkes.harness.cli import main
from fhawkes.harness.config import resolve_model
from fhawkes.harness.metrics import median_iqr, relative_error
from fhawkes.harness.presets import PRESETS, get_preset, preset_models
from fhawkes.harness.runner import build_tasks, run_experiment, run_task
from fhawkes.simulate import read_events_csv


class TestMetrics:
    def test_examples(self):
        theta0 = [1, 0.5, 0.9, 1]
        assert relative_error(theta0, theta0) == 0.0
        assert relative_error(2 * np.array(theta0), theta0) == pytest.approx(4.0)
        assert relative_error([1.1, 0.45, 0.95, 1.2], theta0) == pytest.approx(0.4556, abs=5e-5)

    def test_errors(self):
        with pytest.raises(MetricError):
            relative_error([1, 2], [1, 2, 3])
        with pytest.raises(MetricError):
            relative_error([1, 2], [1, 0])

    def test_median_iqr_order_free(self):
        assert median_iqr([4, 1, 3, 2, 5]) == median_iqr([1, 2, 3, 4, 5]) == (3.0, 2.0)
        assert np.isnan(median_iqr([])[0])


class TestPresets:
    @pytest.mark.parametrize("name,beta", [("FH1", 0.4), ("FH2", 0.5), ("FH3", 0.6), ("FH4", 0.9)])
    def test_univariate(self, name, beta):
        p = get_preset(name.lower())
        m = p.model
        assert (m.mu[0], m.nu[0, 0], m.kernels[0][0].c, m.kernels[0][0].beta) == (1.0, 0.5, 1.0, beta)
        np.testing.assert_array_equal(p.theta0, [1.0, 0.5, beta, 1.0])

    def test_fh5(self):
        p = PRESETS["FH5"]
        np.testing.assert_array_equal(p.model.mu, [0.2, 0.1])
        assert p.parameterization.d == 14

    def test_fh6_grid(self):
        cells = preset_models(PRESETS["FH6"])
        assert len(cells) == 16
        assert all(m.is_stationary for _, m in cells)

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            get_preset("FH9")

    def test_resolve_model(self):
        assert resolve_model("FH4") is PRESETS["FH4"].model
        assert resolve_model({"preset": "FH6", "a": 0.2, "b": 0.1}).nu[0, 1] == 0.2
        m = resolve_model({"mu": [1.0], "nu": [[0.2]], "kernels": {"beta": 0.7, "c": 2.0}})
        assert m.kernels[0][0].beta == 0.7
        with pytest.raises(ConfigurationError):
            resolve_model({"mu": [1.0]})


class TestRunner:
    def test_task_is_deterministic(self):
        task = build_tasks(PRESETS["FH4"], 1, T=[200.0], mt_rules=["2T"], estimators=["whittle"])[0]
        a, b = run_task(task), run_task(task)
        assert a.n_events == b.n_events
        assert a.outcomes[0].value == b.outcomes[0].value

    def test_parallel_matches_serial(self):
        kw = dict(reps=3, T=[150.0], mt_rules=["2T"], estimators=["whittle"])
        one = run_experiment("FH4", threads=1, **kw)
        two = run_experiment("FH4", threads=2, **kw)
        assert one.table() == two.table()

    def test_tiny_table(self):
        res = run_experiment("FH4", reps=2, T=[100.0], mt_rules=["2T"], estimators=["whittle"])
        lines = res.table().splitlines()
        assert lines[0].split()[:1] == ["DGP"]
        assert lines[1].startswith("FH4 T=100")
        assert "(" in lines[1]

    def test_rejection_table(self):
        res = run_experiment("FH6", reps=2, T=[500.0])
        lines = res.table().splitlines()
        assert len(lines) == 6
        assert lines[1].split() == ["a", "\\", "b", "0", "0.1", "0.2", "0.3"]


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture()
def sim_config(tmp_path):
    path = tmp_path / "fh4.json"
    path.write_text(json.dumps({"model": "FH4", "T": 100, "seed": 7}))
    return path


class TestCLI:
    def test_simulate_format(self, tmp_path, sim_config, capsys):
        out = tmp_path / "run"
        assert run_cli("--out", out, "simulate", sim_config) == 0
        lines = (out / "events.csv").read_text().splitlines()
        assert lines[0] == "time,mark"
        times = [float(x.split(",")[0]) for x in lines[1:]]
        assert min(times) >= 0 and max(times) < 100
        meta = json.loads((out / "events.json").read_text())
        assert meta["T"] == 100 and meta["seed"] == 7
        assert (out / "simulate.manifest.json").exists()

    def test_simulate_twice_identical(self, tmp_path, sim_config):
        run_cli("--out", tmp_path / "a", "simulate", sim_config)
        run_cli("--out", tmp_path / "b", "simulate", sim_config)
        assert (tmp_path / "a/events.csv").read_bytes() == (tmp_path / "b/events.csv").read_bytes()

    def test_simulate_nonstationary(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"model": {"mu": [1.0], "nu": [[1.2]], "kernels": {"beta": 0.9, "c": 1.0}}, "T": 10}))
        assert run_cli("--out", tmp_path, "simulate", cfg) == 2
        assert "nonstationary" in capsys.readouterr().err

    def test_simulate_bad_config(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("[1, 2]")
        assert run_cli("--out", tmp_path, "simulate", cfg) == 2

    def test_fit_poisson(self, tmp_path, capsys):
        cfg = tmp_path / "p.json"
        cfg.write_text(json.dumps({"model": {"mu": [2.0], "nu": [[0.0]], "kernels": {"beta": 1.0, "c": 1.0}},
                                   "T": 500, "seed": 1}))
        run_cli("--out", tmp_path, "simulate", cfg)
        n = len(read_events_csv(tmp_path / "events.csv", 500.0))
        assert run_cli("--out", tmp_path, "fit", tmp_path / "events.csv", "--family", "poisson", "--method", "mle") == 0
        fit = json.loads((tmp_path / "fit.json").read_text())
        assert fit["theta_hat"]["mu"] == pytest.approx(n / 500.0, rel=1e-5)

    def test_fit_malformed(self, tmp_path, capsys):
        ev = tmp_path / "ev.csv"
        ev.write_text("time,mark\n0.5,1\noops\n")
        assert run_cli("--out", tmp_path, "fit", ev, "--T", 10) == 3
        assert "line 3" in capsys.readouterr().err

    def test_fit_needs_horizon(self, tmp_path):
        ev = tmp_path / "ev.csv"
        ev.write_text("time,mark\n0.5,1\n")
        assert run_cli("--out", tmp_path, "fit", ev) == 2

    def test_fit_missing_file(self, tmp_path):
        assert run_cli("--out", tmp_path, "fit", tmp_path / "nope.csv", "--T", 10) == 3

    def test_independence_univariate(self, tmp_path, sim_config, capsys):
        run_cli("--out", tmp_path, "simulate", sim_config)
        assert run_cli("--out", tmp_path, "test-independence", tmp_path / "events.csv") == 4
        assert "need D ≥ 2" in capsys.readouterr().err

    def test_independence_report(self, tmp_path):
        cfg = tmp_path / "fh6.json"
        cfg.write_text(json.dumps({"model": {"preset": "FH6", "a": 0, "b": 0}, "T": 1000, "seed": 2}))
        run_cli("--out", tmp_path, "simulate", cfg)
        assert run_cli("--out", tmp_path, "test-independence", tmp_path / "events.csv") == 0
        rep = json.loads((tmp_path / "independence.json").read_text())
        assert rep["df"] == 1 and rep["M_T"] == 316

    def test_spectrum_rows(self, tmp_path):
        assert run_cli("--out", tmp_path, "spectrum", "--preset", "FH4", "--omegas", "0,1.5") == 0
        rows = list(csv.DictReader(open(tmp_path / "spectrum.csv")))
        assert float(rows[0]["omega"]) == 0 and float(rows[0]["re"]) == pytest.approx(8.0)

    def test_spectrum_bivariate(self, tmp_path):
        assert run_cli("--out", tmp_path, "spectrum", "--preset", "FH6", "--num", 6, "--omega-max", 5) == 0
        rows = list(csv.DictReader(open(tmp_path / "spectrum.csv")))
        assert len(rows) == 6 * 4
        table = {(r["omega"], r["i"], r["j"]): complex(float(r["re"]), float(r["im"])) for r in rows}
        for (w, i, j), z in table.items():
            assert table[(w, j, i)] == z.conjugate()
            if float(w) == 0 and i != j:
                assert z == 0

    def test_spectrum_nonstationary(self, tmp_path):
        assert run_cli("--out", tmp_path, "spectrum", "--preset", "FH6", "--a", 0.6, "--b", 0.6) == 2

    def test_experiment_tiny(self, tmp_path):
        args = ["--out", tmp_path, "experiment", "FH4", "--reps", 2, "--T", 100, "--mt-rules", "2T",
                "--estimators", "whittle"]
        assert run_cli(*args) == 0
        assert (tmp_path / "FH4_table.txt").exists()
        assert (tmp_path / "FH4_timings.txt").exists()
        man = json.loads((tmp_path / "experiment.manifest.json").read_text())
        assert set(man["outputs"]) == {"FH4_table.txt", "FH4_replications.csv"}
        assert man["untracked"] == ["FH4_timings.txt"]

    def test_experiment_failure_exit(self, tmp_path, monkeypatch):
        import fhawkes.harness.runner as runner

        monkeypatch.setattr(runner, "FAILURE_LIMIT", -1.0)
        args = ["--out", tmp_path, "experiment", "FH4", "--reps", 1, "--T", 50, "--mt-rules", "2T",
                "--estimators", "whittle"]
        assert run_cli(*args) == 5
        assert (tmp_path / "FH4_failures.txt").exists()

    def test_replay_detects_tampering(self, tmp_path, sim_config):
        out = tmp_path / "run"
        run_cli("--out", out, "simulate", sim_config)
        manifest = out / "simulate.manifest.json"
        assert run_cli("--out", tmp_path / "again", "replay", manifest) == 0
        data = json.loads(manifest.read_text())
        data["outputs"]["events.csv"] = "0" * 64
        manifest.write_text(json.dumps(data))
        assert run_cli("--out", tmp_path / "third", "replay", manifest) == 1

    def test_console_script(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "fhawkes.harness.cli", "--out", str(tmp_path), "spectrum",
                              "--preset", "FH4", "--omegas", "0"], capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        assert (tmp_path / "spectrum.csv").exists()
