"""Experiment harness: band families, config parsing, the normality test,
end-to-end runs at toy scale, and report emission.

Oracles: hand-counted band memberships, closed-form KS statistics for
degenerate sample sets, and scipy's Kolmogorov tail as an independent
implementation of the asymptotic p-value.
"""

import json
import math

import numpy as np
import pytest
import scipy.special

from jdpp.core import InvalidKernelError, SplitSpace
from jdpp.harness import (
    HISTOGRAM_BINS,
    REPORT_COLUMNS,
    BandFamily,
    CltReport,
    DegenerateConfigError,
    ExperimentConfig,
    KappaRule,
    StatisticalAcceptanceError,
    _statistic_gates,
    build_profile,
    build_two_sided_function,
    clt_hypothesis_diagnostics,
    emit_report,
    kolmogorov_pvalue,
    load_experiment_config,
    normality_test,
    parse_experiment_config,
    run_clt_experiment,
    run_experiment,
    run_scaling_experiment,
)
from jdpp.moments import expectation
from jdpp.sampler import SampleBatch
from jdpp.spectral import check_frequency_admissibility, synthesize_kernel, to_jkernel


def clt_payload(**overrides) -> dict:
    payload = {
        "mode": "clt",
        "family": {
            "type": "band",
            "band": [0.125, 0.375],
            "f_on": 0.3,
            "f_off": 0.0,
            "h_on": 0.7,
            "h_off": 1.0,
            "g_on": [0.2, 0.0],
            "g_off": [0.0, 0.0],
        },
        "L_values": [8, 16],
        "test_function": {
            "form": "cosine",
            "plus": {"mean": 1.0, "amplitude": 0.5, "harmonic": 1, "phase": 0.0},
            "minus": {"mean": 0.6, "amplitude": 0.3, "harmonic": 2, "phase": 0.5},
        },
        "replicas": 600,
        "seed": 424242,
        "nmax": 4,
        "output": "toy_clt",
    }
    payload.update(overrides)
    return payload


def scaling_payload(**overrides) -> dict:
    payload = {
        "mode": "scaling",
        "family": {
            "type": "band",
            "band": [0.0, 0.25],
            "f_on": 0.5,
            "f_off": 0.0,
            "h_on": 0.125,
            "h_off": 0.0,
            "g_on": [0.15, 0.0],
            "g_off": [0.0, 0.0],
        },
        "L_values": [8, 12],
        "grid_spacing": 1.0,
        "test_function": {
            "form": "triangle",
            "center": 0.5,
            "halfwidth": 0.25,
            "amplitude": 1.0,
        },
        "replicas": 600,
        "seed": 90210,
        "nmax": 4,
        "output": "toy_scaling",
    }
    payload.update(overrides)
    return payload


class TestBandFamily:
    def test_band_membership_hand_count(self):
        family = BandFamily(0.125, 0.375, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0)
        triple = family.triple(16)
        # Circular frequency distances in band: k in {2..5} and mirrors
        # {11..14} -> 8 on-band frequencies.
        assert int(np.sum(triple.Fhat == 1.0)) == 8
        on = np.flatnonzero(triple.Fhat == 1.0)
        assert list(on) == [2, 3, 4, 5, 11, 12, 13, 14]

    def test_spectra_are_even(self):
        family = BandFamily(0.1, 0.4, 0.3, 0.05, 0.7, 0.9, 0.2 + 0.0j, 0.1 + 0.0j)
        triple = family.triple(15)
        k = np.arange(15)
        mirror = (-k) % 15
        assert np.array_equal(triple.Fhat, triple.Fhat[mirror])
        assert np.array_equal(triple.Hhat, triple.Hhat[mirror])
        assert np.array_equal(triple.Ghat, triple.Ghat[mirror])

    def test_band_bounds_validated(self):
        with pytest.raises(ValueError):
            BandFamily(0.5, 0.5, 1, 0, 1, 0, 0, 0)
        with pytest.raises(ValueError):
            BandFamily(-0.1, 0.5, 1, 0, 1, 0, 0, 0)
        with pytest.raises(ValueError):
            BandFamily(0.0, 1.5, 1, 0, 1, 0, 0, 0)

    def test_reference_clt_family_is_admissible(self):
        family = BandFamily(0.125, 0.375, 0.3, 0.0, 0.7, 1.0, 0.2, 0.0)
        for n in (16, 64, 128):
            assert check_frequency_admissibility(family.triple(n)).valid


class TestKappaRule:
    def test_rules_evaluate(self):
        assert KappaRule("sqrt", 2.0)(16.0) == pytest.approx(8.0)
        assert KappaRule("log")(math.e**2) == pytest.approx(2.0)
        assert KappaRule("power", 1.5, 0.5)(16.0) == pytest.approx(6.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            KappaRule("cube")
        with pytest.raises(ValueError):
            KappaRule("sqrt", -1.0)
        with pytest.raises(ValueError):
            KappaRule("power")  # needs an exponent
        with pytest.raises(ValueError):
            KappaRule("power", 1.0, 1.5)
        with pytest.raises(ValueError):
            KappaRule("sqrt", 1.0, 0.5)  # exponent without power rule
        with pytest.raises(ValueError):
            KappaRule("log")(1.0)


class TestConfigParsing:
    def test_minimal_clt_payload_with_defaults(self):
        payload = clt_payload()
        del payload["mode"], payload["nmax"]
        config = parse_experiment_config(payload, "clt")
        assert config.mode == "clt"
        assert config.grid_spacing == 1.0
        assert config.nmax == 4
        assert config.kappa.rule == "sqrt"
        assert config.sizes() == [8, 16]

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(extra=1), "clt")

    def test_missing_required_key_rejected(self):
        payload = clt_payload()
        del payload["replicas"]
        with pytest.raises(ValueError):
            parse_experiment_config(payload, "clt")

    def test_mode_mismatch_rejected(self):
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(), "scaling")

    def test_l_grid_must_increase(self):
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(L_values=[16, 8]), "clt")
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(L_values=[8, 8]), "clt")
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(L_values=[]), "clt")
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(L_values=[-4, 8]), "clt")

    def test_l_spacing_commensurability(self):
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(L_values=[8, 12.5]), "clt")
        config = parse_experiment_config(
            scaling_payload(L_values=[4, 6], grid_spacing=0.5), "scaling"
        )
        assert config.sizes() == [8, 12]

    def test_scalar_validation(self):
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(replicas=0), "clt")
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(replicas=True), "clt")
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(seed=-1), "clt")
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(nmax=1), "clt")
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(nmax=13), "clt")
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(output=""), "clt")
        with pytest.raises(ValueError):
            parse_experiment_config(clt_payload(group_size=0), "clt")

    def test_family_validation(self):
        bad = clt_payload()
        bad["family"] = dict(bad["family"], type="smooth")
        with pytest.raises(ValueError):
            parse_experiment_config(bad, "clt")
        bad = clt_payload()
        bad["family"] = dict(bad["family"], band=[0.1])
        with pytest.raises(ValueError):
            parse_experiment_config(bad, "clt")
        bad = clt_payload()
        bad["family"] = dict(bad["family"], g_on=0.2)
        with pytest.raises(ValueError):
            parse_experiment_config(bad, "clt")

    def test_test_function_validation(self):
        with pytest.raises(ValueError):
            parse_experiment_config(
                clt_payload(test_function={"form": "spline"}), "clt"
            )
        with pytest.raises(ValueError):
            parse_experiment_config(
                scaling_payload(
                    test_function={
                        "form": "triangle",
                        "center": 1.5,
                        "halfwidth": 0.2,
                        "amplitude": 1.0,
                    }
                ),
                "scaling",
            )
        with pytest.raises(ValueError):
            parse_experiment_config(
                clt_payload(
                    test_function={
                        "form": "cosine",
                        "plus": {"mean": 1.0, "harmonic": -1},
                    }
                ),
                "clt",
            )

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(clt_payload()))
        config = load_experiment_config(path, "clt")
        assert config.replicas == 600
        assert config.family.g_on == 0.2 + 0.0j

    def test_shipped_reference_configs_parse(self):
        import jdpp

        base = json.loads(
            (
                __import__("importlib.resources", fromlist=["files"])
                .files(jdpp)
                .joinpath("configs/reference_clt.json")
                .read_text()
            )
        )
        config = parse_experiment_config(base, "clt")
        assert config.L_values == (64.0, 128.0, 256.0, 512.0)
        scaling = json.loads(
            __import__("importlib.resources", fromlist=["files"])
            .files(jdpp)
            .joinpath("configs/reference_scaling.json")
            .read_text()
        )
        assert parse_experiment_config(scaling, "scaling").mode == "scaling"


class TestFunctionBuilders:
    def test_cosine_two_sided_values(self):
        spec = {
            "form": "cosine",
            "plus": {"mean": 1.0, "amplitude": 0.5, "harmonic": 1, "phase": 0.0},
            "minus": {"mean": 0.0, "amplitude": 0.0, "harmonic": 1, "phase": 0.0},
        }
        space = SplitSpace.counting(4, 4)
        f = build_two_sided_function(spec, space)
        j = np.arange(4)
        expected = 1.0 + 0.5 * np.cos(2 * np.pi * j / 4)
        assert np.allclose(f.values[:4], expected, atol=1e-15)
        assert np.array_equal(f.values[4:], np.zeros(4))

    def test_constant_two_sided(self):
        spec = {"form": "constant", "plus": 2.0, "minus": -1.0}
        f = build_two_sided_function(spec, SplitSpace.counting(3, 3))
        assert np.array_equal(f.values, [2, 2, 2, -1, -1, -1])

    def test_samples_length_checked(self):
        spec = {"form": "samples", "plus": [1.0, 2.0], "minus": [0.0, 0.0]}
        with pytest.raises(ValueError):
            build_two_sided_function(spec, SplitSpace.counting(3, 3))

    def test_triangle_profile_hand_values(self):
        spec = {"form": "triangle", "center": 0.5, "halfwidth": 0.25, "amplitude": 1.0}
        profile = build_profile(spec, 8)
        assert np.allclose(profile, [0, 0, 0, 0.5, 1.0, 0.5, 0, 0], atol=1e-15)

    def test_sampled_profile_length_checked(self):
        with pytest.raises(ValueError):
            build_profile({"form": "samples", "values": [1.0, 2.0]}, 3)


class TestNormalityTest:
    def test_all_zero_samples(self):
        d, p = normality_test(np.zeros(200))
        assert d == pytest.approx(0.5, abs=1e-12)
        assert p < 1e-10

    def test_exact_quantile_grid(self):
        n = 1000
        grid = scipy.special.ndtri((np.arange(1, n + 1) - 0.5) / n)
        d, p = normality_test(grid)
        assert d == pytest.approx(1.0 / (2.0 * n), rel=1e-6)
        assert p > 0.999

    def test_normal_samples_accepted(self):
        rng = np.random.default_rng(1234)
        _, p = normality_test(rng.standard_normal(2000))
        assert p > 0.01

    def test_uniform_samples_rejected(self):
        rng = np.random.default_rng(1234)
        _, p = normality_test(rng.uniform(-1, 1, size=2000))
        assert p < 0.01

    def test_sample_count_floor(self):
        with pytest.raises(ValueError):
            normality_test(np.zeros(99))

    def test_non_finite_rejected(self):
        samples = np.zeros(150)
        samples[3] = np.nan
        with pytest.raises(ValueError):
            normality_test(samples)

    def test_kolmogorov_tail_matches_scipy(self):
        for t in np.linspace(0.05, 3.0, 60):
            assert kolmogorov_pvalue(float(t)) == pytest.approx(
                float(scipy.special.kolmogorov(t)), abs=1e-10
            )
        assert kolmogorov_pvalue(0.0) == 1.0
        assert kolmogorov_pvalue(-1.0) == 1.0


class TestStatisticGates:
    @staticmethod
    def _batch(values, discarded=()):
        values = np.asarray(values, dtype=np.float64)
        n = values.shape[0]
        return SampleBatch(
            seed=0,
            replicas=n,
            configurations=[None if i in discarded else 0 for i in range(n)],
            space=SplitSpace.counting(1, 1),
            discarded=tuple(discarded),
            statistic_values=values,
        )

    def test_mean_gate_fires(self):
        batch = self._batch(np.zeros(200))
        with pytest.raises(StatisticalAcceptanceError):
            _statistic_gates("L = 8", batch, 1.0, 1.0, 0.0, 200)

    def test_variance_gate_fires(self):
        values = np.tile([1.0, -1.0], 100)  # mean 0, variance ~1
        with pytest.raises(StatisticalAcceptanceError):
            _statistic_gates("L = 8", self._batch(values), 0.0, 10.0, 0.0, 200)

    def test_breakdown_rate_gate_fires(self):
        values = np.zeros(200)
        values[0] = np.nan
        batch = self._batch(values, discarded=(0,))
        with pytest.raises(StatisticalAcceptanceError):
            _statistic_gates("L = 8", batch, 0.0, 1.0, 0.0, 200)

    def test_small_kept_count_is_degenerate(self):
        batch = self._batch(np.zeros(80))
        with pytest.raises(DegenerateConfigError):
            _statistic_gates("L = 8", batch, 0.0, 1.0, 0.0, 80)

    def test_passing_batch_returns_kept_stats(self):
        rng = np.random.default_rng(5)
        values = rng.standard_normal(400)
        kept, mean, var = _statistic_gates("L = 8", self._batch(values), 0.0, 1.0, 0.0, 400)
        assert kept.shape == (400,)
        assert mean == pytest.approx(float(np.mean(values)))
        assert var == pytest.approx(float(np.var(values, ddof=1)))


@pytest.fixture(scope="module")
def report():
    config = parse_experiment_config(clt_payload(), "clt")
    return run_clt_experiment(config)


@pytest.fixture(scope="module")
def scaling_report():
    config = parse_experiment_config(scaling_payload(), "scaling")
    return run_scaling_experiment(config)


class TestEndToEndClt:
    def test_rows_and_basic_sanity(self, report):
        assert report.mode == "clt"
        assert [row.N for row in report.rows] == [8, 16]
        for row in report.rows:
            assert row.exact_var > 0
            assert 0.0 <= row.ks_pvalue <= 1.0
            assert row.discarded == 0
            assert row.standardized.shape == (600,)

    def test_exact_mean_recomputed_independently(self, report):
        config = report.config
        for row, n in zip(report.rows, config.sizes()):
            space = SplitSpace.counting(n, n)
            f = build_two_sided_function(config.test_function, space)
            kern = to_jkernel(synthesize_kernel(config.family.triple(n)), space)
            assert row.exact_mean == pytest.approx(expectation(kern, f), rel=1e-12)

    def test_cells_follow_report_columns(self, report):
        cells = report.rows[0].cells()
        assert tuple(cells) == REPORT_COLUMNS

    def test_diagnostics_structure(self, report):
        d = report.diagnostics
        assert len(d["variance_values"]) == 2
        assert d["variance_increasing"] in (True, False)
        assert "sup_over_var_pow_0.1" in d and "sup_over_var_pow_0.25" in d
        assert len(d["c3_normalized_values"]) == 2

    def test_standardized_moments_near_normal(self, report):
        for row in report.rows:
            z = row.standardized
            assert abs(float(np.mean(z))) < 0.25
            assert abs(float(np.var(z, ddof=1)) - 1.0) < 0.3

    def test_run_experiment_dispatch(self, report):
        # Dispatch returns the same structure for the same config/seed.
        again = run_experiment(report.config)
        assert [r.N for r in again.rows] == [r.N for r in report.rows]
        assert again.rows[0].empirical_mean == report.rows[0].empirical_mean

    def test_emit_report_files(self, report, tmp_path):
        out = tmp_path / "out"
        written = emit_report(report, output_dir=str(out))
        names = {p.split("/")[-1] for p in written}
        assert names == {"report.csv", "report.json", "hist_L8.csv", "hist_L16.csv"}
        csv_lines = (out / "report.csv").read_text().splitlines()
        assert csv_lines[0] == ",".join(REPORT_COLUMNS)
        assert len(csv_lines) == 3
        hist_lines = (out / "hist_L8.csv").read_text().splitlines()
        assert len(hist_lines) == HISTOGRAM_BINS + 1
        payload = json.loads((out / "report.json").read_text())
        assert payload["mode"] == "clt"
        assert payload["config"]["seed"] == 424242
        assert payload["config"]["family"]["g_on"] == [0.2, 0.0]
        assert len(payload["rows"]) == 2
        assert len(payload["cumulants"][0]) == 4

    def test_emit_report_histograms_off(self, report, tmp_path):
        out = tmp_path / "nohist"
        written = emit_report(report, output_dir=str(out), histograms=False)
        names = {p.split("/")[-1] for p in written}
        assert names == {"report.csv", "report.json"}

    def test_emit_report_deterministic_bytes(self, report, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        emit_report(report, output_dir=str(out_a))
        emit_report(run_experiment(report.config), output_dir=str(out_b))
        assert (out_a / "report.csv").read_bytes() == (out_b / "report.csv").read_bytes()
        assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()

    def test_figures_rendered_when_requested(self, report, tmp_path):
        out = tmp_path / "figs"
        written = emit_report(report, output_dir=str(out), figures=True)
        names = {p.split("/")[-1] for p in written}
        assert "figure_L8.png" in names
        assert "figure_L16.png" in names
        assert "figure_cumulant_decay.png" in names
        for name in ("figure_L8.png", "figure_cumulant_decay.png"):
            data = (out / name).read_bytes()
            assert data[:8] == b"\x89PNG\r\n\x1a\n"
            assert len(data) > 5000


class TestEndToEndScaling:
    def test_rows(self, scaling_report):
        assert scaling_report.mode == "scaling"
        assert [row.N for row in scaling_report.rows] == [8, 12]
        for row in scaling_report.rows:
            assert row.exact_var > 0
            assert row.sigma_squared > 0

    def test_variance_asymptote_diagnostic(self, scaling_report):
        ratios = scaling_report.diagnostics["variance_over_asymptote"]
        assert len(ratios) == 2
        assert all(r > 0 for r in ratios)

    def test_mean_matches_identity_by_construction(self, scaling_report):
        # The runner asserts the identity internally; verify the reported
        # mean is the identity value.
        config = scaling_report.config
        family = config.family
        for row, n in zip(scaling_report.rows, config.sizes()):
            triple = family.triple(n)
            f0 = float(np.mean(triple.Fhat))
            h0 = float(np.mean(triple.Hhat))
            profile = build_profile(config.test_function, n)
            expected = (f0 - h0) * row.L * float(np.sum(profile)) / n
            assert row.exact_mean == pytest.approx(expected, rel=1e-12)


class TestRunGuards:
    def test_mode_guards(self):
        clt_config = parse_experiment_config(clt_payload(), "clt")
        with pytest.raises(ValueError):
            run_scaling_experiment(clt_config)
        scaling_config = parse_experiment_config(scaling_payload(), "scaling")
        with pytest.raises(ValueError):
            run_clt_experiment(scaling_config)

    def test_clt_requires_unit_spacing(self):
        config = parse_experiment_config(
            clt_payload(L_values=[4.0, 8.0], grid_spacing=0.5), "clt"
        )
        with pytest.raises(DegenerateConfigError):
            run_clt_experiment(config)

    def test_inadmissible_family_rejected_before_sampling(self):
        payload = clt_payload()
        payload["family"] = dict(payload["family"], f_on=1.5)
        config = parse_experiment_config(payload, "clt")
        with pytest.raises(InvalidKernelError):
            run_clt_experiment(config)

    def test_zero_test_function_is_degenerate(self):
        payload = clt_payload(test_function={"form": "constant", "plus": 0.0})
        config = parse_experiment_config(payload, "clt")
        with pytest.raises(DegenerateConfigError):
            run_clt_experiment(config)

    def test_zero_profile_is_degenerate(self):
        payload = scaling_payload(
            test_function={"form": "cosine", "mean": 0.0, "amplitude": 0.0}
        )
        config = parse_experiment_config(payload, "scaling")
        with pytest.raises(DegenerateConfigError):
            run_scaling_experiment(config)

    def test_emit_empty_report_rejected(self):
        config = parse_experiment_config(clt_payload(), "clt")
        report = CltReport(mode="clt", rows=[], config=config, diagnostics={})
        with pytest.raises(ValueError):
            emit_report(report)

    def test_diagnostics_on_rows(self):
        config = parse_experiment_config(clt_payload(), "clt")
        report = run_clt_experiment(config)
        d = clt_hypothesis_diagnostics(report.rows, config)
        assert d["variance_values"] == [row.exact_var for row in report.rows]
        assert d["kappa_rule"]["rule"] == "sqrt"
