import csv
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from resilient_ogd.cli import main
from resilient_ogd.config import (
    ConfigError,
    PRESETS,
    RunConfig,
    derive_seed,
    format_config,
    parse_config,
    parse_overrides,
    preset,
)
from resilient_ogd.experiment import AssumptionFailure, run_experiment
from resilient_ogd.graph import AdversaryPlacement, cycle_graph, write_graph
from resilient_ogd.plot import emit_plot, render_svg


CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def smoke(**kw):
    return preset("smoke", plot=False, **kw)


class TestConfig:
    def test_roundtrip(self):
        cfg = RunConfig(n=12, F=None, checkpoints=(5, 10), strategy_params="-1 1", sigma=0.25)
        assert parse_config(format_config(cfg)) == cfg

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# header\n\nn = 17  # trailing\nfilter = relative\n")
        assert cfg.n == 17 and cfg.filter == "relative"

    @pytest.mark.parametrize("text", ["bogus = 1", "n 3", "n = three", "plot = maybe", "filter = median"])
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_manifest_keys_ignored_when_lenient(self):
        assert parse_overrides("realized.R = 4\nT = 7", strict=False) == {"T": 7}

    def test_presets_valid(self):
        for name in PRESETS:
            assert preset(name).T >= 1
        with pytest.raises(ConfigError):
            preset("huge")

    def test_derived_seeds_independent(self):
        seeds = {derive_seed(0, p) for p in range(1, 10)}
        assert len(seeds) == 9
        assert derive_seed(3, 4) == derive_seed(3, 4)
        assert derive_seed(3, 4) != derive_seed(4, 4)


class TestExperiment:
    def test_smoke_run_sanity(self):
        res = run_experiment(smoke())
        assert res.sim.equivalence_error < 1e-9
        assert res.trace.discrepancy < 1e-9
        assert np.allclose(res.schedule.alpha.sum(axis=1), 1, atol=1e-10)
        assert res.manifest["gamma_hat"] == len(res.regular)
        assert res.regret.horizons[-1] == 200

    def test_longer_horizon_does_not_perturb_prefix(self):
        a = run_experiment(smoke(T=100, checkpoints=(50, 100)))
        b = run_experiment(smoke(T=150, checkpoints=(50, 100)))
        np.testing.assert_array_equal(a.sim.states[:101], b.sim.states[:101])

    def test_seed_changes_outputs(self):
        a = run_experiment(smoke(T=50, checkpoints=(50,)))
        b = run_experiment(smoke(T=50, checkpoints=(50,), seed=1))
        assert not np.array_equal(a.sim.states, b.sim.states)

    def test_assumption_failure(self, tmp_path):
        path = tmp_path / "c6.txt"
        write_graph(path, cycle_graph(6), AdversaryPlacement.of([], 1))
        with pytest.raises(AssumptionFailure):
            run_experiment(smoke(graph_file=str(path)))

    def test_minimum_curvature_step_diverges(self):
        # 1/(min H^2 t) overshoots badly for high-gain sensors
        res = run_experiment(preset("paper", step_rho="min", plot=False))
        assert res.manifest["max_abs_state"] > 1e100
        assert res.regret.network[-1] > 1e100

    def test_relative_filter_and_synthetic_stream(self):
        res = run_experiment(smoke(filter="relative", stream="synthetic-piecewise", step_rho="1"))
        assert res.sim.equivalence_error < 1e-9
        assert np.all(np.isfinite(res.regret.network))

    def test_output_files(self, tmp_path):
        run_experiment(preset("smoke", write_rounds=True, write_matrices=True), out_dir=tmp_path)
        for name in ("states.csv", "regret.csv", "weights.csv", "regret.svg",
                     "manifest.txt", "rounds.csv", "matrices.csv"):
            assert (tmp_path / name).exists(), name
        with open(tmp_path / "regret.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["t", "network", "agent_min", "agent_max", "bound"]
        assert len(rows) == 200
        manifest = (tmp_path / "manifest.txt").read_text()
        assert "realized.cap = 1000000.0" in manifest
        assert "# check: F-local: pass" in manifest


class TestPlot:
    def test_svg_is_well_formed(self, tmp_path):
        t = np.arange(1, 101)
        path = emit_plot({"a": 1 / t, "b": np.log(t) / t, "c & d": np.ones(100)}, tmp_path / "p.svg",
                         x=t, logx=True, title="regret <T>")
        root = ET.parse(path).getroot()
        ns = "{http://www.w3.org/2000/svg}"
        assert len(root.findall(f"{ns}polyline")) == 3

    def test_constant_series_is_horizontal(self):
        root = ET.fromstring(render_svg({"flat": [2.0] * 5}))
        pts = root.find("{http://www.w3.org/2000/svg}polyline").get("points").split()
        assert len({p.split(",")[1] for p in pts}) == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            render_svg({})

    def test_log_axis_needs_positive_x(self):
        with pytest.raises(ValueError):
            render_svg({"a": [1, 2]}, x=[0, 1], logx=True)


class TestCli:
    @pytest.mark.parametrize("argv", [
        ["--help"], ["graph", "--help"], ["graph", "gen", "--help"], ["graph", "check", "--help"],
        ["run", "--help"], ["analyze", "--help"], ["plot", "--help"], ["replay", "--help"],
    ])
    def test_help(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 0
        assert "usage" in capsys.readouterr().out

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_bad_override_is_usage_error(self, tmp_path):
        assert main(["run", "--preset", "smoke", "--set", "nonsense=1", "--out", str(tmp_path)]) == 2

    def test_graph_check_cycle_fails(self, tmp_path, capsys):
        path = tmp_path / "c6.txt"
        write_graph(path, cycle_graph(6), AdversaryPlacement.of([], 1))
        assert main(["graph", "check", str(path)]) == 1
        out = capsys.readouterr().out
        assert "3-robust: FAIL (max robustness 1)" in out

    def test_graph_gen_then_check(self, tmp_path):
        path = tmp_path / "g.txt"
        assert main(["graph", "gen", "--n", "12", "--F", "1", "--adversaries", "1", "--out", str(path)]) == 0
        assert main(["graph", "check", str(path)]) == 0

    def test_run_replay_analyze_plot(self, tmp_path, capsys):
        out = tmp_path / "run"
        cfg = tmp_path / "smoke.cfg"
        cfg.write_text("n = 15\nF = 1\nadversaries = 2\nT = 120\ntail = 50\ncheckpoints = 30 60 120\n")
        assert main(["run", "--config", str(cfg), "--seed", "7", "--out", str(out)]) == 0
        assert main(["replay", str(out)]) == 0
        assert "replay identical" in capsys.readouterr().out
        for name in ("states.csv", "regret.csv", "weights.csv", "regret.svg"):
            assert (out / name).read_bytes() == (out / "replay" / name).read_bytes()
        assert main(["analyze", str(out)]) == 0
        assert "network regret / T decreasing" in capsys.readouterr().out
        assert main(["plot", str(out), "--out", str(tmp_path / "p.svg"), "--linear"]) == 0
        ET.parse(tmp_path / "p.svg")

    def test_replay_detects_tampering(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["run", "--preset", "smoke", "--set", "T=40", "--set", "checkpoints=20 40",
                     "--out", str(out)]) == 0
        with open(out / "regret.csv", "a") as fh:
            fh.write("junk\n")
        assert main(["replay", str(out)]) == 1
        assert "regret.csv" in capsys.readouterr().out

    def test_shipped_config_replays(self, tmp_path, capsys):
        out = tmp_path / "p7"
        assert main(["run", "--config", str(CONFIGS / "paper.cfg"), "--seed", "7", "--out", str(out)]) == 0
        assert main(["replay", str(out)]) == 0
        assert "replay identical" in capsys.readouterr().out

    def test_desk_preset_budget(self, tmp_path):
        t0 = time.perf_counter()
        assert main(["run", "--preset", "desk", "--out", str(tmp_path)]) == 0
        assert time.perf_counter() - t0 < 60
        with open(tmp_path / "regret.csv") as fh:
            assert sum(1 for _ in csv.DictReader(fh)) == 2000

    def test_missing_run_dir(self, tmp_path):
        assert main(["analyze", str(tmp_path / "nope")]) == 2
