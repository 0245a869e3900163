"""Harness behavior: config resolution, runners, CLI, deterministic output.

Runner tests use deliberately tiny budgets; they check wiring, artifact
layout and byte-level reproducibility, not estimation quality.
"""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from winduq.cli import main
from winduq.data import make_hourly_power_series
from winduq.experiments import (
    ConfigError,
    OUT_DIR_ENV_VAR,
    auto_kl_weight,
    build_config,
    format_cell,
    read_config_file,
    run_data_property,
    run_dataset_scaling,
    run_synthetic_ood,
    write_csv,
)
from winduq.network import ArchitectureSpec, init_parameters
from winduq.posterior import DropConnectPosterior, save_posterior
from winduq.uncertainty import decompose_batch


def read_table(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def csv_bytes(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.csv"))}


class TestConfigFileParsing:
    def test_key_value_lines_with_comments(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# a comment\n"
            "\n"
            "seeds = 1, 2\n"
            "batch_size=64\n"
            "  lr = 1e-3, 50, 0.3  \n"
        )
        entries = read_config_file(path)
        assert entries == {"seeds": "1, 2", "batch_size": "64", "lr": "1e-3, 50, 0.3"}

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "dup.cfg"
        path.write_text("seeds = 1\nseeds = 2\n")
        with pytest.raises(ConfigError, match="duplicate"):
            read_config_file(path)

    def test_missing_equals_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("seeds\n")
        with pytest.raises(ConfigError, match="key = value"):
            read_config_file(path)

    def test_empty_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("= 3\n")
        with pytest.raises(ConfigError, match="empty key"):
            read_config_file(path)


class TestBuildConfig:
    def test_per_experiment_defaults(self):
        cfg = build_config("data_property", {})
        assert cfg.hidden_widths == (64, 64, 64)
        assert cfg.epochs == {
            "deep_ensemble": 20,
            "mc_dropconnect": 150,
            "bayes_by_backprop": 300,
        }
        assert cfg.lr["mc_dropconnect"] == (1e-3, 60, 0.1)
        assert cfg.betas["deep_ensemble"] == (0.2, 0.8)
        assert cfg.betas["bayes_by_backprop"] == (0.4, 0.6)
        assert cfg.band == (2.0, 11.0)
        syn = build_config("synthetic_ood", {})
        assert syn.hidden_widths == (32, 32)
        assert syn.grid_points == 301
        assert syn.betas["deep_ensemble"] == (0.0, 0.5, 1.0)
        assert syn.epochs["deep_ensemble"] == 600
        assert syn.lr["deep_ensemble"] == (1e-2, 200, 0.3)
        assert cfg.lags == 10
        scale = build_config("dataset_scaling", {})
        assert scale.ratios == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
        assert scale.betas["mc_dropconnect"] == (0.6,)
        assert scale.lr["bayes_by_backprop"] == (1e-4, 100, 0.1)
        assert scale.lags == 24

    def test_global_and_per_sampler_overrides(self):
        cfg = build_config(
            "synthetic_ood",
            {
                "epochs": "7",
                "lr": "1e-2, 10, 0.5",
                "betas": "0.3, 0.9",
                "mc_dropconnect.epochs": "11",
                "mc_dropconnect.lr": "2e-3, 5, 0.2",
                "deep_ensemble.betas": "1.0",
            },
        )
        assert cfg.epochs["deep_ensemble"] == 7
        assert cfg.epochs["mc_dropconnect"] == 11
        assert cfg.lr["bayes_by_backprop"] == (1e-2, 10, 0.5)
        assert cfg.lr["mc_dropconnect"] == (2e-3, 5, 0.2)
        assert cfg.betas["deep_ensemble"] == (1.0,)
        assert cfg.betas["bayes_by_backprop"] == (0.3, 0.9)

    def test_kl_weight_forms(self):
        assert build_config("synthetic_ood", {"kl_weight": "1/316"}).kl_weight == pytest.approx(
            1.0 / 316.0, rel=1e-15
        )
        assert build_config("synthetic_ood", {"kl_weight": "0.25"}).kl_weight == 0.25
        assert build_config("synthetic_ood", {"kl_weight": "auto"}).kl_weight is None

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            build_config("synthetic_ood", {"learning_rate": "0.1"})

    def test_experiment_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="declares experiment"):
            build_config("synthetic_ood", {"experiment": "dataset_scaling"})
        cfg = build_config("synthetic_ood", {"experiment": "synthetic_ood"})
        assert cfg.experiment == "synthetic_ood"

    def test_list_and_band_parsing(self):
        cfg = build_config(
            "data_property",
            {"seeds": "3, 5, 8", "samplers": "deep_ensemble", "band": "1.5, 9.0"},
        )
        assert cfg.seeds == (3, 5, 8)
        assert cfg.samplers == ("deep_ensemble",)
        assert cfg.band == (1.5, 9.0)
        with pytest.raises(ConfigError, match="band"):
            build_config("data_property", {"band": "9.0, 1.5"})
        with pytest.raises(ConfigError, match="unknown sampler"):
            build_config("data_property", {"samplers": "bootstrap"})
        with pytest.raises(ConfigError, match="duplicate sampler"):
            build_config("data_property", {"samplers": "deep_ensemble, deep_ensemble"})

    def test_ratio_validation(self):
        with pytest.raises(ConfigError, match="ratios"):
            build_config("dataset_scaling", {"ratios": "0.0, 0.5"})
        with pytest.raises(ConfigError, match="ratios"):
            build_config("dataset_scaling", {"ratios": "0.5, 1.5"})

    def test_decompose_requires_posterior_and_dataset(self):
        with pytest.raises(ConfigError, match="posterior_dir"):
            build_config("decompose", {"dataset": "x.csv"})
        with pytest.raises(ConfigError, match="dataset"):
            build_config("decompose", {"posterior_dir": "p"})

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="unknown experiment"):
            build_config("calibration", {})


class TestAutoKlWeight:
    def test_batch_count_rounds_to_nearest(self):
        # 23652/128 = 184.8 and 2365/128 = 18.5 round to 185 and 18 batches
        assert auto_kl_weight(23652, 128) == pytest.approx(1.0 / 185.0, rel=1e-15)
        assert auto_kl_weight(2365, 128) == pytest.approx(1.0 / 18.0, rel=1e-15)

    def test_small_datasets_floor_at_one_batch(self):
        assert auto_kl_weight(10, 128) == 1.0
        assert auto_kl_weight(64, 128) == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            auto_kl_weight(0, 128)
        with pytest.raises(ValueError):
            auto_kl_weight(100, 0)


class TestCsvWriting:
    def test_floats_round_trip_exactly(self, tmp_path):
        values = [0.1, 1.0 / 3.0, 1e-17, -2.5, 123456.789]
        path = tmp_path / "t.csv"
        write_csv(path, ["v"], [[v] for v in values])
        rows = read_table(path)
        assert [float(r["v"]) for r in rows] == values

    def test_cells_format_stably(self):
        assert format_cell(0.1) == "0.1"
        assert format_cell(np.float64(0.25)) == "0.25"
        assert format_cell(3) == "3"
        assert format_cell("deep_ensemble") == "deep_ensemble"

    def test_row_width_checked(self, tmp_path):
        with pytest.raises(ValueError, match="width"):
            write_csv(tmp_path / "t.csv", ["a", "b"], [[1.0]])

    def test_trailing_newline(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ["a"], [[1]])
        assert path.read_text() == "a\n1\n"


def _synthetic_entries(out_dir: Path) -> dict[str, str]:
    return {
        "samplers": "deep_ensemble, mc_dropconnect",
        "seeds": "1",
        "hidden_widths": "8",
        "epochs": "2",
        "lr": "1e-3, 50, 0.3",
        "betas": "0.5",
        "grid_points": "21",
        "sine_n_train": "64",
        "sine_n_test": "16",
        "batch_size": "32",
        "ensemble_size": "2",
        "mc_samples": "8",
        "drop_rate": "0.1",
        "out_dir": str(out_dir),
    }


class TestSyntheticRunner:
    def test_artifacts_and_manifest(self, tmp_path):
        out = tmp_path / "run"
        manifest = run_synthetic_ood(build_config("synthetic_ood", _synthetic_entries(out)))
        assert manifest["status"] == "ok"
        assert sorted(manifest["artifacts"]) == sorted(
            [
                "synthetic_deep_ensemble_beta0p5_seed1.csv",
                "synthetic_mc_dropconnect_beta0p5_seed1.csv",
                "summary.csv",
            ]
        )
        for name in manifest["artifacts"]:
            assert (out / name).stat().st_size > 0
        stored = json.loads((out / "manifest.json").read_text())
        assert stored["experiment"] == "synthetic_ood"
        assert stored["datasets"][0]["rows"] == 64
        grid_rows = read_table(out / "synthetic_deep_ensemble_beta0p5_seed1.csv")
        assert len(grid_rows) == 21
        assert list(grid_rows[0]) == ["x", "mean", "aleatoric", "epistemic", "total"]
        total = float(grid_rows[3]["total"])
        assert total == float(grid_rows[3]["aleatoric"]) + float(grid_rows[3]["epistemic"])
        summary = read_table(out / "summary.csv")
        assert len(summary) == 2
        assert {r["sampler"] for r in summary} == {"deep_ensemble", "mc_dropconnect"}
        for row in summary:
            assert float(row["mean_eu_id"]) >= 0.0
            assert np.isfinite(float(row["mse_test"]))

    def test_reruns_are_byte_identical(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        run_synthetic_ood(build_config("synthetic_ood", _synthetic_entries(first)))
        run_synthetic_ood(build_config("synthetic_ood", _synthetic_entries(second)))
        assert csv_bytes(first) == csv_bytes(second)
        assert len(csv_bytes(first)) == 3


class TestDataPropertyRunner:
    def test_artifacts_and_band_split(self, tmp_path):
        out = tmp_path / "run"
        entries = {
            "samplers": "deep_ensemble",
            "betas": "0.2",
            "seeds": "1",
            "hidden_widths": "8",
            "epochs": "2",
            "surrogate_n": "500",
            "lags": "5",
            "batch_size": "64",
            "ensemble_size": "2",
            "out_dir": str(out),
        }
        manifest = run_data_property(build_config("data_property", entries))
        assert manifest["status"] == "ok"
        assert manifest["source"].startswith("surrogate")
        summary = read_table(out / "summary.csv")
        assert len(summary) == 1
        row = summary[0]
        assert int(row["n_in_band"]) > 0 and int(row["n_out_band"]) > 0
        assert np.isfinite(float(row["spearman_au_density"]))
        # 495 windows split 9:1:1 by flooring leaves 45 test rows
        samples = read_table(out / "property_deep_ensemble_beta0p2_seed1.csv")
        assert len(samples) == 45
        assert list(samples[0]) == [
            "wind_speed", "power", "mean", "aleatoric", "epistemic", "total", "density_rank",
        ]
        speeds = np.array([float(r["wind_speed"]) for r in samples])
        assert speeds.max() > 11.0 or speeds.min() < 2.0  # out-of-band rows exist


class TestScalingRunner:
    def test_rows_trend_and_auto_kl(self, tmp_path):
        out = tmp_path / "run"
        entries = {
            "samplers": "deep_ensemble, bayes_by_backprop",
            "seeds": "2",
            "hidden_widths": "8",
            "epochs": "2",
            "series_n": "400",
            "ratios": "0.3, 1.0",
            "batch_size": "128",
            "ensemble_size": "2",
            "mc_samples": "8",
            "out_dir": str(out),
        }
        manifest = run_dataset_scaling(build_config("dataset_scaling", entries))
        assert manifest["status"] == "ok"
        rows = read_table(out / "scaling.csv")
        assert len(rows) == 4  # 2 samplers x 2 ratios
        # 400 points, 24 lags: 376 windows, ceil(37.6) = 38 test, 338 pool
        by_key = {(r["sampler"], r["ratio"]): r for r in rows}
        assert int(by_key[("deep_ensemble", "1.0")]["n_train"]) == 338
        assert int(by_key[("deep_ensemble", "0.3")]["n_train"]) == 101
        assert by_key[("deep_ensemble", "1.0")]["kl_weight"] == ""
        # auto KL weight: round(101/128) -> 1 batch, round(338/128) -> 3
        assert float(by_key[("bayes_by_backprop", "0.3")]["kl_weight"]) == 1.0
        assert float(by_key[("bayes_by_backprop", "1.0")]["kl_weight"]) == pytest.approx(
            1.0 / 3.0, rel=1e-15
        )
        summary = read_table(out / "summary.csv")
        assert len(summary) == 2
        for row in summary:
            assert -1.0 <= float(row["spearman_ratio_eu"]) <= 1.0
            assert float(row["eu_first_ratio"]) >= 0.0


class TestCli:
    def _write_config(self, path: Path, entries: dict[str, str]) -> Path:
        path.write_text("".join(f"{k} = {v}\n" for k, v in entries.items()))
        return path

    def test_synthetic_round_trip_with_seed_override(self, tmp_path, capsys):
        entries = _synthetic_entries(tmp_path / "ignored")
        del entries["out_dir"]
        cfg_path = self._write_config(tmp_path / "run.cfg", entries)
        out = tmp_path / "cli_run"
        code = main(
            ["synthetic", "--config", str(cfg_path), "--seed", "9", "--out-dir", str(out)]
        )
        assert code == 0
        assert "synthetic_ood" in capsys.readouterr().out
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seeds"] == [9]
        assert (out / "synthetic_deep_ensemble_beta0p5_seed9.csv").is_file()

    def test_cli_reruns_byte_identical(self, tmp_path):
        cfg_path = self._write_config(
            tmp_path / "run.cfg",
            {k: v for k, v in _synthetic_entries(tmp_path / "x").items() if k != "out_dir"},
        )
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synthetic", "--config", str(cfg_path), "--out-dir", str(a)]) == 0
        assert main(["synthetic", "--config", str(cfg_path), "--out-dir", str(b)]) == 0
        assert csv_bytes(a) == csv_bytes(b)

    def test_env_var_overrides_out_dir(self, tmp_path, monkeypatch):
        cfg_path = self._write_config(
            tmp_path / "run.cfg",
            {k: v for k, v in _synthetic_entries(tmp_path / "x").items() if k != "out_dir"},
        )
        flag_dir = tmp_path / "flag"
        env_dir = tmp_path / "env"
        monkeypatch.setenv(OUT_DIR_ENV_VAR, str(env_dir))
        assert main(["synthetic", "--config", str(cfg_path), "--out-dir", str(flag_dir)]) == 0
        assert (env_dir / "manifest.json").is_file()
        assert not flag_dir.exists()

    def test_decompose_matches_library_call(self, tmp_path):
        spec = ArchitectureSpec(2, (4,))
        fp = DropConnectPosterior(spec, init_parameters(spec, seed=5), 0.2, 8)
        pdir = tmp_path / "posterior"
        save_posterior(fp, pdir)
        rng = np.random.default_rng(3)
        X = rng.normal(size=(5, 2))
        features = tmp_path / "inputs.csv"
        features.write_text(
            "f1,f2\n" + "\n".join(f"{float(a)!r},{float(b)!r}" for a, b in X) + "\n"
        )
        cfg_path = self._write_config(
            tmp_path / "dec.cfg",
            {"posterior_dir": str(pdir), "mc_samples": "8", "seeds": "3"},
        )
        out = tmp_path / "out"
        code = main(
            [
                "decompose", "--config", str(cfg_path),
                "--dataset", str(features), "--out-dir", str(out),
            ]
        )
        assert code == 0
        rows = read_table(out / "decomposition.csv")
        assert list(rows[0]) == ["f1", "f2", "mean", "aleatoric", "epistemic", "total"]
        expected = decompose_batch(fp, X, 8, seed=3)
        for i, row in enumerate(rows):
            assert float(row["aleatoric"]) == expected.aleatoric[i]
            assert float(row["epistemic"]) == expected.epistemic[i]
            assert float(row["mean"]) == expected.mean[i]

    def test_scaling_accepts_series_csv(self, tmp_path):
        series = make_hourly_power_series(seed=2, n=400)
        data = tmp_path / "series.csv"
        data.write_text("power\n" + "\n".join(repr(float(v)) for v in series) + "\n")
        cfg_path = self._write_config(
            tmp_path / "s.cfg",
            {
                "samplers": "deep_ensemble",
                "seeds": "1",
                "hidden_widths": "8",
                "epochs": "2",
                "ratios": "1.0",
                "ensemble_size": "2",
            },
        )
        out = tmp_path / "out"
        code = main(
            [
                "scaling", "--config", str(cfg_path),
                "--dataset", str(data), "--out-dir", str(out),
            ]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["source"] == f"csv:{data}"
        assert len(read_table(out / "scaling.csv")) == 1

    def test_failure_writes_manifest(self, tmp_path, capsys):
        cfg_path = self._write_config(
            tmp_path / "dec.cfg",
            {"posterior_dir": str(tmp_path / "missing"), "seeds": "1"},
        )
        out = tmp_path / "out"
        code = main(
            [
                "decompose", "--config", str(cfg_path),
                "--dataset", str(tmp_path / "also_missing.csv"), "--out-dir", str(out),
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert manifest["error"]

    def test_config_error_exits_nonzero(self, tmp_path, capsys):
        cfg_path = self._write_config(tmp_path / "bad.cfg", {"not_a_key": "1"})
        code = main(["synthetic", "--config", str(cfg_path)])
        assert code == 1
        assert "unknown config keys" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["synthetic", "--config", str(tmp_path / "nope.cfg")])
        assert code == 1
        assert "not found" in capsys.readouterr().err

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            main([])
