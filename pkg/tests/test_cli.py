import filecmp
import json
import os

import numpy as np
import pytest

from gsvgd.cli import main, parse_config, run_experiment
from gsvgd.errors import ConfigError, NumericalError


def minimal_config(**overrides):
    cfg = {"target": "gauss", "method": "svgd"}
    cfg.update(overrides)
    return json.dumps(cfg)


def small_run_config(out_dir, **overrides):
    cfg = {
        "target": "gauss",
        "target_params": {"mean": [1.0, -1.0], "cov": [[1.0, 0.5], [0.5, 1.0]]},
        "method": "gsvgd",
        "dynamics": {"kind": "HMC", "A": 1.0},
        "integrator": "split",
        "run": {"eps": 0.05, "iters": 20, "n_particles": 16, "seed": 7},
        "trace": {"every": 5},
        "diagnostics": {"energy_ref": 200},
        "output_dir": str(out_dir),
    }
    cfg.update(overrides)
    return json.dumps(cfg)


class TestParseConfig:
    def test_minimal_fills_defaults_and_roundtrips(self):
        cfg = parse_config(minimal_config())
        assert cfg.eps == 0.1 and cfg.iters == 100 and cfg.kind == "LD"
        echo = json.dumps(cfg.to_dict())
        assert parse_config(echo).to_dict() == cfg.to_dict()

    def test_zero_eps_names_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(run={"eps": 0}))
        assert exc.value.key == "run.eps"

    def test_unknown_method_lists_valid(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(method="foo"))
        assert "svgd" in str(exc.value) and "mcmc" in str(exc.value)

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(warp_drive=1))
        assert exc.value.key == "warp_drive"

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(run={"step": 0.1}))
        assert exc.value.key == "run.step"

    def test_zero_iters_rejected(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(run={"iters": 0}))
        assert exc.value.key == "run.iters"

    def test_invalid_json(self):
        with pytest.raises(ConfigError):
            parse_config("{not json")

    def test_svgd_requires_ld(self):
        with pytest.raises(ConfigError):
            parse_config(minimal_config(dynamics={"kind": "HMC"}))

    def test_split_requires_momentum_kind(self):
        with pytest.raises(ConfigError):
            parse_config(minimal_config(integrator="split"))

    def test_mcmc_rejects_split(self):
        with pytest.raises(ConfigError):
            parse_config(minimal_config(method="mcmc", integrator="split",
                                        dynamics={"kind": "HMC"}))

    def test_bnn_requires_data_path(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(target="bnn", method="gsvgd"))
        assert exc.value.key == "data.path"

    def test_fixed_kernel_requires_h(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_config(kernel={"mode": "fixed"}))
        assert exc.value.key == "kernel.h"

    def test_gauss_cov_requires_mean(self, tmp_path):
        cfg = parse_config(minimal_config(
            target_params={"cov": [[1.0, 0.0], [0.0, 1.0]]},
            run={"iters": 1, "eps": 0.1, "n_particles": 2},
            output_dir=str(tmp_path / "o")))
        with pytest.raises(ConfigError) as exc:
            run_experiment(cfg)
        assert exc.value.key == "target_params.cov"


class TestRunExperiment:
    def test_writes_outputs(self, tmp_path):
        cfg = parse_config(small_run_config(tmp_path / "out"))
        summary = run_experiment(cfg)
        out = tmp_path / "out"
        assert (out / "trace.csv").exists()
        assert (out / "summary.json").exists()
        assert (out / "snapshots" / "snapshot_00000000.csv").exists()
        assert summary["final"]["energy_dist"] < summary["initial"]["energy_dist"]
        assert summary["config"]["run"]["seed"] == 7

    def test_single_iteration_trace(self, tmp_path):
        cfg = parse_config(minimal_config(
            run={"iters": 1, "eps": 0.05, "n_particles": 4},
            output_dir=str(tmp_path / "o")))
        run_experiment(cfg)
        lines = (tmp_path / "o" / "trace.csv").read_text().splitlines()
        assert len(lines) == 2  # header + exactly one row
        snaps = sorted(os.listdir(tmp_path / "o" / "snapshots"))
        assert snaps == ["snapshot_00000000.csv", "snapshot_00000001.csv"]

    def test_byte_identical_reruns(self, tmp_path):
        for name in ("a", "b"):
            cfg = parse_config(small_run_config(tmp_path / name))
            run_experiment(cfg)
        match, mismatch, errors = filecmp.cmpfiles(
            tmp_path / "a", tmp_path / "b",
            ["trace.csv"], shallow=False)
        assert mismatch == [] and errors == []
        a_snaps = sorted(os.listdir(tmp_path / "a" / "snapshots"))
        for snap in a_snaps:
            assert (tmp_path / "a" / "snapshots" / snap).read_bytes() == \
                (tmp_path / "b" / "snapshots" / snap).read_bytes()

    def test_trace_cadence_does_not_change_trajectory(self, tmp_path):
        finals = []
        for name, every in (("e1", 1), ("e2", 7)):
            cfg = parse_config(small_run_config(tmp_path / name,
                                                trace={"every": every}))
            run_experiment(cfg)
            snaps = sorted(os.listdir(tmp_path / name / "snapshots"))
            finals.append((tmp_path / name / "snapshots" / snaps[-1])
                          .read_bytes())
        assert finals[0] == finals[1]

    def test_numerical_abort_carries_iteration(self, tmp_path):
        cfg = parse_config(small_run_config(
            tmp_path / "o", run={"eps": 50.0, "iters": 200,
                                 "n_particles": 8, "seed": 0}))
        with pytest.raises(NumericalError) as exc:
            run_experiment(cfg)
        assert exc.value.iteration is not None

    def test_resample_period(self, tmp_path):
        cfg = parse_config(small_run_config(
            tmp_path / "o", sampler={"resample_period": 5}))
        run_experiment(cfg)  # just exercises the resampling branch

    def test_mcmc_method(self, tmp_path):
        cfg = parse_config(small_run_config(
            tmp_path / "o", method="mcmc", integrator="euler",
            run={"eps": 0.01, "iters": 30, "n_particles": 32, "seed": 1}))
        summary = run_experiment(cfg)
        assert np.isfinite(summary["final"]["energy_dist"])

    def test_tri_crescent_mode_columns(self, tmp_path):
        cfg = parse_config(json.dumps({
            "target": "tri_crescent", "method": "svgd",
            "run": {"eps": 0.05, "iters": 5, "n_particles": 8, "seed": 0},
            "output_dir": str(tmp_path / "o")}))
        run_experiment(cfg)
        header = (tmp_path / "o" / "trace.csv").read_text().splitlines()[0]
        assert header == "iter,mode_0,mode_1,mode_2,unassigned"


class TestMethodKindMatrix:
    @pytest.mark.parametrize("method,kind,integrator", [
        ("svgd", "LD", "euler"),
        ("gsvgd", "LD", "euler"),
        ("gsvgd", "RLD", "euler"),
        ("gsvgd", "HMC", "split"),
        ("gsvgd", "NHT", "split"),
        ("gsvgd", "RHMC", "split"),
        ("gsvgd", "ThirdOrder", "split"),
        ("gsvgd_alt", "HMC", "euler"),
        ("blob", "LD", "euler"),
        ("parvi_blob", "HMC", "euler"),
        ("mcmc", "LD", "euler"),
        ("mcmc", "HMC", "euler"),
        ("mcmc", "NHT", "euler"),
        ("mcmc", "RLD", "euler"),
    ])
    def test_combo_runs_and_is_finite(self, tmp_path, method, kind, integrator):
        cfg = parse_config(json.dumps({
            "target": "gauss",
            "target_params": {"dim": 2},
            "method": method,
            "dynamics": {"kind": kind, "A": 0.5, "sigma2": 1.0, "mu": 1.0,
                         "gamma": 0.5},
            "integrator": integrator,
            "run": {"eps": 0.01, "iters": 8, "n_particles": 6, "seed": 3},
            "trace": {"every": 4},
            "diagnostics": {"energy_ref": 50},
            "output_dir": str(tmp_path / "o"),
        }))
        summary = run_experiment(cfg)
        assert np.isfinite(summary["final"]["energy_dist"])


class TestBnnRun:
    @pytest.fixture()
    def csv_path(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, size=40)
        y = np.sin(3 * x) + 0.1 * rng.standard_normal(40)
        path = tmp_path / "toy.csv"
        path.write_text("\n".join(f"{a},{b}" for a, b in zip(x, y)))
        return path

    def test_bnn_sghmc_run(self, tmp_path, csv_path):
        cfg = parse_config(json.dumps({
            "target": "bnn", "method": "gsvgd",
            "dynamics": {"kind": "HMC", "A": 1.0, "sigma2": 1.0},
            "integrator": "split",
            "run": {"eps": 0.001, "iters": 10, "n_particles": 4, "seed": 0},
            "bnn": {"hidden": 8, "batch": 16},
            "data": {"path": str(csv_path), "seed": 0},
            "output_dir": str(tmp_path / "o")}))
        summary = run_experiment(cfg)
        assert np.isfinite(summary["final"]["test_ll"])
        header = (tmp_path / "o" / "trace.csv").read_text().splitlines()[0]
        assert header == "iter,test_ll"


class TestMain:
    def test_run_and_exit_codes(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(small_run_config(tmp_path / "out",
                                         run={"eps": 0.05, "iters": 5,
                                              "n_particles": 8, "seed": 0}))
        assert main(["run", "--config", str(path)]) == 0

    def test_validate_echoes(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(minimal_config())
        assert main(["validate", "--config", str(path)]) == 0
        echoed = json.loads(capsys.readouterr().out)
        assert echoed["run"]["eps"] == 0.1

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(minimal_config(run={"eps": 0}))
        assert main(["run", "--config", str(path)]) == 2

    def test_missing_config_is_io_error(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 4

    def test_numerical_abort_exit_code(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(small_run_config(
            tmp_path / "out", run={"eps": 50.0, "iters": 100,
                                   "n_particles": 8, "seed": 0}))
        assert main(["run", "--config", str(path)]) == 3

    def test_seed_override_changes_output(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(small_run_config(tmp_path / "a"))
        assert main(["run", "--config", str(path), "--out",
                     str(tmp_path / "a"), "--seed", "1"]) == 0
        assert main(["run", "--config", str(path), "--out",
                     str(tmp_path / "b"), "--seed", "2"]) == 0
        assert (tmp_path / "a" / "trace.csv").read_bytes() != \
            (tmp_path / "b" / "trace.csv").read_bytes()

    def test_modes_subcommand(self, capsys):
        assert main(["modes", "--target", "tri_crescent"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out == ["2.0,2.0", "-2.0,-2.0", "0.0,2.0"]

    def test_modes_unknown_target(self):
        assert main(["modes", "--target", "bnn"]) == 2

    def test_console_invocation(self):
        import subprocess
        import sys
        out = subprocess.run(
            [sys.executable, "-m", "gsvgd.cli", "modes", "--target", "gauss"],
            capture_output=True, text=True)
        assert out.returncode == 0
        assert out.stdout.strip() == "0.0,0.0"
