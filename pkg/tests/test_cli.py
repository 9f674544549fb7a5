"""Command-line interface: every subcommand end to end, exit codes, and
output formats.  Commands run in-process through ``main(argv)``; one smoke
test exercises the installed console script.
"""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from jdpp.cli import main
from jdpp.core import save_kernel
from jdpp.moments import TestFunction, cumulants, save_test_function
from jdpp.sampler import sample_jdpp_batch
from jdpp.spectral import save_spectral_triple
from conftest import random_invalid_kernel, random_valid_kernel, random_valid_triple


@pytest.fixture()
def kernel_file(tmp_path, rng):
    kern = random_valid_kernel(rng, 2, 2)
    path = tmp_path / "kernel.json"
    save_kernel(kern, path)
    return path, kern


@pytest.fixture()
def f_file(tmp_path, rng):
    values = rng.normal(size=4)
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"values": list(values)}) + "\n")
    return path, values


def tiny_clt_config(tmp_path, **overrides):
    payload = {
        "mode": "clt",
        "family": {
            "type": "band",
            "band": [0.125, 0.375],
            "f_on": 0.3,
            "h_on": 0.7,
            "h_off": 1.0,
            "g_on": [0.2, 0.0],
        },
        "L_values": [8, 16],
        "test_function": {
            "form": "cosine",
            "plus": {"mean": 1.0, "amplitude": 0.5},
            "minus": {"mean": 0.6, "amplitude": 0.3, "harmonic": 2},
        },
        "replicas": 400,
        "seed": 777,
        "output": str(tmp_path / "clt_out"),
    }
    payload.update(overrides)
    path = tmp_path / "clt.json"
    path.write_text(json.dumps(payload))
    return path


def tiny_scaling_config(tmp_path, **overrides):
    payload = {
        "mode": "scaling",
        "family": {
            "type": "band",
            "band": [0.0, 0.25],
            "f_on": 0.5,
            "h_on": 0.125,
            "g_on": [0.15, 0.0],
        },
        "L_values": [8, 12],
        "test_function": {
            "form": "triangle",
            "center": 0.5,
            "halfwidth": 0.25,
            "amplitude": 1.0,
        },
        "replicas": 400,
        "seed": 31,
        "output": str(tmp_path / "scaling_out"),
    }
    payload.update(overrides)
    path = tmp_path / "scaling.json"
    path.write_text(json.dumps(payload))
    return path


class TestValidateSpectrum:
    def test_valid_triple_exit_zero(self, tmp_path, rng, capsys):
        path = tmp_path / "triple.json"
        save_spectral_triple(random_valid_triple(rng, 8), path)
        assert main(["validate-spectrum", str(path)]) == 0
        out = capsys.readouterr().out
        assert "valid: True" in out

    def test_invalid_triple_exit_two(self, tmp_path, rng, capsys):
        from conftest import random_invalid_triple

        path = tmp_path / "triple.json"
        save_spectral_triple(random_invalid_triple(rng, 8), path)
        assert main(["validate-spectrum", str(path)]) == 2
        assert "valid: False" in capsys.readouterr().out

    def test_missing_file_exit_three(self, tmp_path, capsys):
        assert main(["validate-spectrum", str(tmp_path / "nope.json")]) == 3
        assert "error" in capsys.readouterr().err


class TestCumulantsCommand:
    def test_output_matches_library(self, kernel_file, f_file, capsys):
        kpath, kern = kernel_file
        fpath, values = f_file
        assert (
            main(["cumulants", "--kernel", str(kpath), "--f", str(fpath), "--nmax", "4"])
            == 0
        )
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "order,value"
        series = cumulants(kern, TestFunction(kern.space, values), 4)
        for line, order in zip(out[1:], range(1, 5)):
            label, value = line.split(",")
            assert int(label) == order
            assert float(value) == pytest.approx(series.order(order), rel=1e-12)

    def test_bad_nmax_exit_three(self, kernel_file, f_file, capsys):
        kpath, _ = kernel_file
        fpath, _ = f_file
        assert (
            main(["cumulants", "--kernel", str(kpath), "--f", str(fpath), "--nmax", "0"])
            == 3
        )
        assert "error" in capsys.readouterr().err


class TestOracleCommand:
    def test_full_distribution_sums_to_one(self, kernel_file, capsys):
        kpath, _ = kernel_file
        assert main(["oracle", "--kernel", str(kpath)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "configuration,probability"
        assert len(lines) == 1 + 16
        total = sum(float(line.split(",")[1]) for line in lines[1:])
        assert total == pytest.approx(1.0, abs=1e-10)
        assert lines[1].startswith("0x0,")

    def test_statistic_atoms(self, kernel_file, f_file, capsys):
        kpath, _ = kernel_file
        fpath, _ = f_file
        assert main(["oracle", "--kernel", str(kpath), "--f", str(fpath)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "value,probability"
        probs = [float(line.split(",")[1]) for line in lines[1:]]
        assert sum(probs) == pytest.approx(1.0, abs=1e-10)
        values = [float(line.split(",")[0]) for line in lines[1:]]
        assert values == sorted(values)

    def test_statistic_cumulants(self, kernel_file, f_file, capsys):
        kpath, kern = kernel_file
        fpath, values = f_file
        assert (
            main(["oracle", "--kernel", str(kpath), "--f", str(fpath), "--nmax", "3"])
            == 0
        )
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "order,value"
        series = cumulants(kern, TestFunction(kern.space, values), 3)
        got = [float(line.split(",")[1]) for line in lines[1:]]
        for order, value in enumerate(got, start=1):
            assert value == pytest.approx(series.order(order), rel=1e-8, abs=1e-8)

    def test_nmax_without_f_rejected(self, kernel_file, capsys):
        kpath, _ = kernel_file
        assert main(["oracle", "--kernel", str(kpath), "--nmax", "3"]) == 3
        assert "error" in capsys.readouterr().err

    def test_summary_mode_for_larger_spaces(self, tmp_path, rng, capsys):
        kern = random_valid_kernel(rng, 7, 6)  # 13 points > full-print cap
        path = tmp_path / "big.json"
        save_kernel(kern, path)
        assert main(["oracle", "--kernel", str(path)]) == 0
        out = capsys.readouterr().out
        assert "quantity,value" in out
        assert "configurations,8192" in out
        total = [l for l in out.splitlines() if l.startswith("total_probability,")]
        assert float(total[0].split(",")[1]) == pytest.approx(1.0, abs=1e-9)


class TestSampleCommand:
    def test_csv_format_and_determinism(self, kernel_file, tmp_path, capsys):
        kpath, kern = kernel_file
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        argv = ["sample", "--kernel", str(kpath), "--n", "50", "--seed", "12345"]
        assert main(argv + ["--out", str(out1)]) == 0
        assert main(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        lines = out1.read_text().splitlines()
        assert lines[0] == "replica_index,configuration"
        assert len(lines) == 51
        index, mask = lines[1].split(",")
        assert index == "0" and mask.startswith("0x")
        batch = sample_jdpp_batch(kern, 50, 12345)
        assert int(lines[1].split(",")[1], 16) == batch.configurations[0]

    def test_statistic_column(self, kernel_file, f_file, tmp_path, capsys):
        kpath, kern = kernel_file
        fpath, values = f_file
        out = tmp_path / "s.csv"
        assert (
            main(
                [
                    "sample", "--kernel", str(kpath), "--n", "20",
                    "--seed", "9", "--out", str(out), "--f", str(fpath),
                ]
            )
            == 0
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "replica_index,configuration,statistic"
        f = TestFunction(kern.space, values)
        batch = sample_jdpp_batch(kern, 20, 9, f=f)
        for line, mask, stat in zip(lines[1:], batch.configurations, batch.statistic_values):
            _, mask_cell, stat_cell = line.split(",")
            assert int(mask_cell, 16) == mask
            assert float(stat_cell) == pytest.approx(float(stat), rel=1e-15)

    def test_invalid_kernel_exit_two(self, tmp_path, rng, capsys):
        path = tmp_path / "bad.json"
        save_kernel(random_invalid_kernel(rng, 2, 2), path)
        code = main(
            ["sample", "--kernel", str(path), "--n", "5", "--seed", "1",
             "--out", str(tmp_path / "x.csv")]
        )
        assert code == 2
        assert "invalid kernel" in capsys.readouterr().err


class TestExperimentCommands:
    def test_clt_run_writes_reports_and_figures(self, tmp_path, capsys):
        config = tiny_clt_config(tmp_path)
        assert main(["clt", "--config", str(config)]) == 0
        out = capsys.readouterr().out
        out_dir = tmp_path / "clt_out"
        assert (out_dir / "report.csv").exists()
        assert (out_dir / "report.json").exists()
        assert (out_dir / "hist_L8.csv").exists()
        assert (out_dir / "figure_L8.png").exists()
        assert (out_dir / "figure_L16.png").exists()
        assert (out_dir / "figure_cumulant_decay.png").exists()
        assert "L=8" in out and "L=16" in out
        assert "wrote" in out

    def test_no_figures_and_no_histograms_flags(self, tmp_path, capsys):
        config = tiny_clt_config(tmp_path)
        override = tmp_path / "lean"
        assert (
            main(
                ["clt", "--config", str(config), "--output", str(override),
                 "--no-histograms", "--no-figures"]
            )
            == 0
        )
        written = sorted(p.name for p in override.iterdir())
        assert written == ["report.csv", "report.json"]

    def test_scaling_run(self, tmp_path, capsys):
        config = tiny_scaling_config(tmp_path)
        assert main(["scaling", "--config", str(config), "--no-figures"]) == 0
        out_dir = tmp_path / "scaling_out"
        payload = json.loads((out_dir / "report.json").read_text())
        assert payload["mode"] == "scaling"
        assert "variance_over_asymptote" in payload["diagnostics"]

    def test_inadmissible_family_exit_two(self, tmp_path, capsys):
        config = tiny_clt_config(tmp_path)
        payload = json.loads(config.read_text())
        payload["family"]["f_on"] = 1.4
        config.write_text(json.dumps(payload))
        assert main(["clt", "--config", str(config)]) == 2
        assert "invalid kernel" in capsys.readouterr().err

    def test_malformed_config_exit_three(self, tmp_path, capsys):
        config = tiny_clt_config(tmp_path, L_values=[16, 8])
        assert main(["clt", "--config", str(config)]) == 3
        assert "error" in capsys.readouterr().err

    def test_missing_config_exit_three(self, tmp_path, capsys):
        assert main(["clt", "--config", str(tmp_path / "none.json")]) == 3

    def test_degenerate_config_exit_three(self, tmp_path, capsys):
        config = tiny_clt_config(
            tmp_path, test_function={"form": "constant", "plus": 0.0}
        )
        assert main(["clt", "--config", str(config)]) == 3
        assert "degenerate configuration" in capsys.readouterr().err


class TestConsoleScript:
    def test_installed_entry_point(self, tmp_path, rng):
        exe = shutil.which("jdpp")
        if exe is None:
            pytest.skip("console script not installed")
        kern = random_valid_kernel(rng, 1, 1)
        path = tmp_path / "k.json"
        save_kernel(kern, path)
        proc = subprocess.run(
            [exe, "oracle", "--kernel", str(path)],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("configuration,probability")

    def test_module_invocation(self, tmp_path, rng):
        kern = random_valid_kernel(rng, 1, 1)
        path = tmp_path / "k.json"
        save_kernel(kern, path)
        proc = subprocess.run(
            [sys.executable, "-m", "jdpp.cli", "oracle", "--kernel", str(path)],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("configuration,probability")
