"""Monte Carlo harness: central-limit verification runs at desk scale.

Two experiment modes over a size grid ``L_1 < L_2 < ...`` of torus kernels
drawn from a band family template:

* ``clt`` — counting measure, a fixed two-sided test function per size;
  compares empirical mean/variance of the linear statistic against exact
  traces (5-standard-error gates), runs a Kolmogorov-Smirnov normality test
  on the standardized samples, and reports exact normalized third/fourth
  cumulants so their decay along the grid is visible.

* ``scaling`` — signed statistic (profile on side 1, its negative on side 2),
  profile sampled on the unit grid ``u_j = j/N``; the exact mean is compared
  against the closed-form signed-mean identity at every size, and the
  standardized samples are tested for normality as above.

Both modes validate every kernel in the grid (per-frequency admissibility)
before any sampling happens, abort when the numerical-breakdown rate exceeds
0.1%, and refuse degenerate configurations (zero test function, vanishing
variance) instead of producing vacuous reports.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os

import numpy as np

from .core import InvalidKernelError, SplitSpace
from .moments import (
    MAX_CUMULANT_ORDER,
    CumulantSeries,
    TestFunction,
    cumulants,
    expectation,
    signed_mean_identity,
    variance,
)
from .sampler import DEFAULT_GROUP_SIZE, SampleBatch, sample_jdpp_batch, sample_torus_batch
from .spectral import (
    SpectralTriple,
    TranslationKernel,
    check_frequency_admissibility,
    sigma_squared,
    synthesize_kernel,
    tail_diagnostic,
    to_jkernel,
)

logger = logging.getLogger("jdpp.harness")

#: Exact variances below this are treated as a degenerate configuration.
VARIANCE_FLOOR = 1e-12

#: Replicas lost to numerical breakdown beyond this fraction abort the run.
MAX_BREAKDOWN_FRACTION = 1e-3

#: Number of standard errors allowed between empirical and exact moments.
MOMENT_GATE_SE = 5.0

#: Fixed histogram range/bin count for emitted standardized-sample data.
HISTOGRAM_RANGE = (-6.0, 6.0)
HISTOGRAM_BINS = 96

#: Fixed column order of the delimited report.
REPORT_COLUMNS = (
    "L",
    "N",
    "exact_mean",
    "exact_var",
    "sigma_squared",
    "sup_abs_f",
    "exact_mean_abs_f",
    "c3_normalized",
    "c4_normalized",
    "empirical_mean",
    "empirical_variance",
    "ks_statistic",
    "ks_pvalue",
    "tail_diagnostic",
)


class DegenerateConfigError(ValueError):
    """A structurally valid configuration that cannot produce a meaningful run."""


class StatisticalAcceptanceError(RuntimeError):
    """Empirical results violated a statistical acceptance gate."""


# ---------------------------------------------------------------------------
# configuration parsing


def _strict_keys(payload: dict, allowed: set, required: set, what: str) -> None:
    if not isinstance(payload, dict):
        raise ValueError(f"{what} must be a JSON object")
    unknown = set(payload) - allowed
    if unknown:
        raise ValueError(f"unknown keys in {what}: {sorted(unknown)}")
    missing = required - set(payload)
    if missing:
        raise ValueError(f"missing keys in {what}: {sorted(missing)}")


def _finite_float(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{what} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite")
    return value


def _complex_pair(value, what: str) -> complex:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ValueError(f"{what} must be a [re, im] pair")
    return complex(_finite_float(value[0], what), _finite_float(value[1], what))


@dataclasses.dataclass(frozen=True)
class BandFamily:
    """Size-indexed family of spectral triples: two constant plateaus.

    The band is measured on the circular frequency distance
    ``min(k, N - k) / N`` (range ``[0, 1/2]``): frequencies whose distance
    lies in ``[lo, hi)`` take the on-band values, the rest the off-band
    values, for each of the three spectral sequences.  The spectra are
    therefore even in ``k``; with a real coupling plateau the assembled
    kernels are real, which lets the sampler work in real arithmetic.
    """

    lo: float
    hi: float
    f_on: float
    f_off: float
    h_on: float
    h_off: float
    g_on: complex
    g_off: complex

    def __post_init__(self) -> None:
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise ValueError("band fractions must satisfy 0 <= lo < hi <= 1")

    def triple(self, n: int, d: int = 1) -> SpectralTriple:
        k = np.arange(n)
        frac = np.minimum(k, n - k) / n
        on = (frac >= self.lo) & (frac < self.hi)
        return SpectralTriple(
            N=n,
            Fhat=np.where(on, self.f_on, self.f_off),
            Hhat=np.where(on, self.h_on, self.h_off),
            Ghat=np.where(on, self.g_on, self.g_off),
            d=d,
        )


def _parse_family(payload) -> BandFamily:
    _strict_keys(
        payload,
        {"type", "band", "f_on", "f_off", "h_on", "h_off", "g_on", "g_off"},
        {"type", "band", "f_on", "h_on", "g_on"},
        "family",
    )
    if payload["type"] != "band":
        raise ValueError(f"unknown family type {payload['type']!r} (expected 'band')")
    band = payload["band"]
    if not (isinstance(band, (list, tuple)) and len(band) == 2):
        raise ValueError("family band must be a [lo, hi] pair of fractions")
    return BandFamily(
        lo=_finite_float(band[0], "band lo"),
        hi=_finite_float(band[1], "band hi"),
        f_on=_finite_float(payload["f_on"], "f_on"),
        f_off=_finite_float(payload.get("f_off", 0.0), "f_off"),
        h_on=_finite_float(payload["h_on"], "h_on"),
        h_off=_finite_float(payload.get("h_off", 0.0), "h_off"),
        g_on=_complex_pair(payload["g_on"], "g_on"),
        g_off=_complex_pair(payload.get("g_off", [0.0, 0.0]), "g_off"),
    )


@dataclasses.dataclass(frozen=True)
class KappaRule:
    """Cutoff-growth rule ``kappa(L)`` used by the tail diagnostic."""

    rule: str
    scale: float = 1.0
    exponent: float | None = None

    def __post_init__(self) -> None:
        if self.rule not in ("sqrt", "log", "power"):
            raise ValueError("kappa rule must be one of 'sqrt', 'log', 'power'")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError("kappa scale must be positive and finite")
        if self.rule == "power":
            if self.exponent is None or not 0.0 < float(self.exponent) < 1.0:
                raise ValueError("power kappa needs an exponent in (0, 1)")
        elif self.exponent is not None:
            raise ValueError("exponent is only meaningful for the power rule")

    def __call__(self, L: float) -> float:
        if self.rule == "sqrt":
            return self.scale * math.sqrt(L)
        if self.rule == "log":
            if L <= 1.0:
                raise ValueError("log kappa rule needs L > 1")
            return self.scale * math.log(L)
        return self.scale * L ** float(self.exponent)


def _parse_kappa(payload) -> KappaRule:
    _strict_keys(payload, {"rule", "scale", "exponent"}, {"rule"}, "kappa")
    exponent = payload.get("exponent")
    return KappaRule(
        rule=payload["rule"],
        scale=_finite_float(payload.get("scale", 1.0), "kappa scale"),
        exponent=None if exponent is None else _finite_float(exponent, "kappa exponent"),
    )


_SIDE_KEYS = {"mean", "amplitude", "harmonic", "phase"}


def _parse_cosine_side(payload, what: str) -> dict:
    if payload is None:
        return {"mean": 0.0, "amplitude": 0.0, "harmonic": 1, "phase": 0.0}
    _strict_keys(payload, _SIDE_KEYS, set(), what)
    harmonic = payload.get("harmonic", 1)
    if isinstance(harmonic, bool) or not isinstance(harmonic, int) or harmonic < 0:
        raise ValueError(f"{what} harmonic must be a non-negative integer")
    return {
        "mean": _finite_float(payload.get("mean", 0.0), f"{what} mean"),
        "amplitude": _finite_float(payload.get("amplitude", 0.0), f"{what} amplitude"),
        "harmonic": harmonic,
        "phase": _finite_float(payload.get("phase", 0.0), f"{what} phase"),
    }


def _validate_test_function(payload, mode: str) -> dict:
    """Validate the test-function spec eagerly; return a normalized copy."""
    if not isinstance(payload, dict) or "form" not in payload:
        raise ValueError("test_function must be an object with a 'form' key")
    form = payload["form"]
    if mode == "clt":
        if form == "cosine":
            _strict_keys(payload, {"form", "plus", "minus"}, {"form", "plus"}, "test_function")
            return {
                "form": "cosine",
                "plus": _parse_cosine_side(payload["plus"], "test_function plus"),
                "minus": _parse_cosine_side(payload.get("minus"), "test_function minus"),
            }
        if form == "constant":
            _strict_keys(payload, {"form", "plus", "minus"}, {"form", "plus"}, "test_function")
            return {
                "form": "constant",
                "plus": _finite_float(payload["plus"], "test_function plus"),
                "minus": _finite_float(payload.get("minus", 0.0), "test_function minus"),
            }
        if form == "samples":
            _strict_keys(payload, {"form", "plus", "minus"}, {"form", "plus", "minus"}, "test_function")
            plus = [_finite_float(v, "test_function plus") for v in payload["plus"]]
            minus = [_finite_float(v, "test_function minus") for v in payload["minus"]]
            return {"form": "samples", "plus": plus, "minus": minus}
        raise ValueError(f"unknown clt test_function form {form!r}")
    # scaling mode: the spec describes a profile on the unit interval
    if form == "triangle":
        _strict_keys(
            payload, {"form", "center", "halfwidth", "amplitude"},
            {"form", "center", "halfwidth", "amplitude"}, "test_function",
        )
        center = _finite_float(payload["center"], "triangle center")
        halfwidth = _finite_float(payload["halfwidth"], "triangle halfwidth")
        amplitude = _finite_float(payload["amplitude"], "triangle amplitude")
        if not 0.0 < center < 1.0:
            raise ValueError("triangle center must lie strictly inside (0, 1)")
        if halfwidth <= 0:
            raise ValueError("triangle halfwidth must be positive")
        return {"form": "triangle", "center": center, "halfwidth": halfwidth, "amplitude": amplitude}
    if form == "cosine":
        _strict_keys(payload, {"form", "mean", "amplitude", "harmonic", "phase"}, {"form"}, "test_function")
        side = {k: payload.get(k) for k in _SIDE_KEYS if k in payload}
        return {"form": "cosine", **_parse_cosine_side(side or None, "test_function")}
    if form == "samples":
        _strict_keys(payload, {"form", "values"}, {"form", "values"}, "test_function")
        return {
            "form": "samples",
            "values": [_finite_float(v, "test_function values") for v in payload["values"]],
        }
    raise ValueError(f"unknown scaling test_function form {form!r}")


def _cosine_values(side: dict, n: int) -> np.ndarray:
    j = np.arange(n)
    return side["mean"] + side["amplitude"] * np.cos(
        2.0 * np.pi * side["harmonic"] * j / n + side["phase"]
    )


def build_two_sided_function(spec: dict, space: SplitSpace) -> TestFunction:
    """Materialize a clt-mode test function on a (N, N) split space."""
    n = space.n1
    if spec["form"] == "cosine":
        values = np.concatenate([_cosine_values(spec["plus"], n), _cosine_values(spec["minus"], n)])
    elif spec["form"] == "constant":
        values = np.concatenate([np.full(n, spec["plus"]), np.full(n, spec["minus"])])
    else:  # samples
        plus = np.asarray(spec["plus"], dtype=np.float64)
        minus = np.asarray(spec["minus"], dtype=np.float64)
        if plus.shape != (n,) or minus.shape != (n,):
            raise ValueError(
                f"sampled test function sides must each have length {n}; "
                f"got {plus.shape[0]} and {minus.shape[0]}"
            )
        values = np.concatenate([plus, minus])
    return TestFunction(space, values)


def build_profile(spec: dict, n: int) -> np.ndarray:
    """Sample a scaling-mode profile on the unit grid ``u_j = j/n``."""
    u = np.arange(n) / n
    if spec["form"] == "triangle":
        return spec["amplitude"] * np.maximum(
            0.0, 1.0 - np.abs(u - spec["center"]) / spec["halfwidth"]
        )
    if spec["form"] == "cosine":
        return spec["mean"] + spec["amplitude"] * np.cos(
            2.0 * np.pi * spec["harmonic"] * u + spec["phase"]
        )
    values = np.asarray(spec["values"], dtype=np.float64)
    if values.shape != (n,):
        raise ValueError(f"sampled profile must have length {n}, got {values.shape[0]}")
    return values


_CONFIG_KEYS = {
    "mode",
    "family",
    "L_values",
    "grid_spacing",
    "test_function",
    "replicas",
    "seed",
    "nmax",
    "kappa",
    "output",
    "group_size",
}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (see :func:`parse_experiment_config`)."""

    mode: str
    family: BandFamily
    L_values: tuple
    grid_spacing: float
    test_function: dict
    replicas: int
    seed: int
    nmax: int
    kappa: KappaRule
    output: str
    group_size: int = DEFAULT_GROUP_SIZE

    def sizes(self) -> list:
        """Point counts ``N`` per configured ``L`` (N * spacing == L)."""
        out = []
        for L in self.L_values:
            n = round(L / self.grid_spacing)
            if n < 2 or abs(n * self.grid_spacing - L) > 1e-9 * max(1.0, abs(L)):
                raise ValueError(
                    f"L = {L} is not a multiple of the grid spacing {self.grid_spacing}"
                )
            out.append(int(n))
        return out


def parse_experiment_config(payload: dict, mode: str) -> ExperimentConfig:
    """Validate a raw JSON object into an :class:`ExperimentConfig`.

    Unknown keys anywhere are rejected; the L grid must be strictly
    increasing; ``nmax`` must lie in [2, 12]; a ``mode`` key, when present,
    must match the requested runner.
    """
    if mode not in ("clt", "scaling"):
        raise ValueError("mode must be 'clt' or 'scaling'")
    _strict_keys(
        payload,
        _CONFIG_KEYS,
        {"family", "L_values", "test_function", "replicas", "seed", "output"},
        "experiment config",
    )
    if "mode" in payload and payload["mode"] != mode:
        raise ValueError(
            f"config declares mode {payload['mode']!r} but was run as {mode!r}"
        )
    raw_l = payload["L_values"]
    if not (isinstance(raw_l, list) and raw_l):
        raise ValueError("L_values must be a non-empty list")
    l_values = tuple(_finite_float(L, "L value") for L in raw_l)
    if any(L <= 0 for L in l_values):
        raise ValueError("L values must be positive")
    if any(b <= a for a, b in zip(l_values, l_values[1:])):
        raise ValueError("L values must be strictly increasing")
    spacing = _finite_float(payload.get("grid_spacing", 1.0), "grid_spacing")
    if spacing <= 0:
        raise ValueError("grid_spacing must be positive")
    replicas = payload["replicas"]
    if isinstance(replicas, bool) or not isinstance(replicas, int) or replicas < 1:
        raise ValueError("replicas must be a positive integer")
    seed = payload["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ValueError("seed must be an integer in [0, 2^64)")
    nmax = payload.get("nmax", 4)
    if isinstance(nmax, bool) or not isinstance(nmax, int) or not 2 <= nmax <= MAX_CUMULANT_ORDER:
        raise ValueError(f"nmax must be an integer in [2, {MAX_CUMULANT_ORDER}]")
    group_size = payload.get("group_size", DEFAULT_GROUP_SIZE)
    if isinstance(group_size, bool) or not isinstance(group_size, int) or group_size < 1:
        raise ValueError("group_size must be a positive integer")
    output = payload["output"]
    if not isinstance(output, str) or not output:
        raise ValueError("output must be a non-empty path string")
    config = ExperimentConfig(
        mode=mode,
        family=_parse_family(payload["family"]),
        L_values=l_values,
        grid_spacing=spacing,
        test_function=_validate_test_function(payload["test_function"], mode),
        replicas=replicas,
        seed=seed,
        nmax=nmax,
        kappa=_parse_kappa(payload.get("kappa", {"rule": "sqrt"})),
        output=output,
        group_size=group_size,
    )
    config.sizes()  # L / spacing commensurability, eagerly
    return config


def load_experiment_config(path, mode: str) -> ExperimentConfig:
    """Read and validate an experiment config from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return parse_experiment_config(payload, mode)


# ---------------------------------------------------------------------------
# normality test


def _standard_normal_cdf(values: np.ndarray) -> np.ndarray:
    root2 = math.sqrt(2.0)
    return np.array([0.5 * (1.0 + math.erf(v / root2)) for v in values])


def kolmogorov_pvalue(t: float) -> float:
    """Tail of the Kolmogorov distribution: ``2 sum (-1)^{j-1} exp(-2 j^2 t^2)``."""
    if t <= 0:
        return 1.0
    total = 0.0
    for j in range(1, 201):
        term = math.exp(-2.0 * j * j * t * t)
        if term < 1e-16:
            break
        total += term if j % 2 else -term
    return min(1.0, max(0.0, 2.0 * total))


def normality_test(samples) -> tuple:
    """One-sample Kolmogorov-Smirnov test against the standard normal.

    Returns ``(statistic, pvalue)`` with the asymptotic p-value
    ``P(sup |B| > sqrt(n) D)``.  Requires at least 100 samples — below that
    the asymptotic tail is not trustworthy and the call refuses to guess.
    """
    arr = np.sort(np.asarray(samples, dtype=np.float64).reshape(-1))
    n = arr.shape[0]
    if n < 100:
        raise ValueError(f"normality test needs at least 100 samples, got {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    cdf = _standard_normal_cdf(arr)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    d = float(max(d_plus, d_minus))
    return d, kolmogorov_pvalue(math.sqrt(n) * d)


# ---------------------------------------------------------------------------
# report rows


@dataclasses.dataclass
class CltRow:
    """Per-size results; ``standardized`` backs histograms and figures."""

    L: float
    N: int
    exact_mean: float
    exact_var: float
    sigma_squared: float
    sup_abs_f: float
    exact_mean_abs_f: float
    c3_normalized: float
    c4_normalized: float
    empirical_mean: float
    empirical_variance: float
    ks_statistic: float
    ks_pvalue: float
    tail_diagnostic: float
    cumulant_series: CumulantSeries = dataclasses.field(repr=False)
    standardized: np.ndarray = dataclasses.field(repr=False)
    discarded: int = 0

    def cells(self) -> dict:
        return {name: getattr(self, name) for name in REPORT_COLUMNS}


@dataclasses.dataclass
class CltReport:
    """Full experiment outcome: per-size rows plus hypothesis diagnostics."""

    mode: str
    rows: list
    config: ExperimentConfig
    diagnostics: dict


def clt_hypothesis_diagnostics(rows, config: ExperimentConfig) -> dict:
    """Numerical diagnostics for the central-limit hypotheses (no verdict).

    Reports variance growth along the grid, the sup-norm-to-variance
    comparisons at exponents 0.1 and 0.25, the growth exponent of the
    absolute-statistic mean against the variance (least-squares slope of the
    log-log cloud), normalized cumulant decay, and the tail-mass trend.
    Interpreting the numbers is left to the reader: the hypotheses are
    asymptotic statements a finite grid can support but never prove.
    """
    variances = [row.exact_var for row in rows]
    sups = [row.sup_abs_f for row in rows]
    mean_abs = [row.exact_mean_abs_f for row in rows]
    tails = [row.tail_diagnostic for row in rows]
    ratios = [b / a for a, b in zip(variances, variances[1:]) if a > 0]
    sup_vs_var = {
        f"sup_over_var_pow_{eps}": [
            s / v**eps if v > 0 else float("inf") for s, v in zip(sups, variances)
        ]
        for eps in (0.1, 0.25)
    }
    delta_slope = None
    pairs = [(v, m) for v, m in zip(variances, mean_abs) if v > 0 and m > 0]
    if len(pairs) >= 2:
        logs = np.log(np.array(pairs))
        delta_slope = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])
    return {
        "variance_values": variances,
        "variance_ratios": ratios,
        "variance_increasing": bool(all(r > 1.0 for r in ratios)) if ratios else None,
        **sup_vs_var,
        "mean_abs_growth_exponent_vs_variance": delta_slope,
        "c3_normalized_values": [row.c3_normalized for row in rows],
        "c4_normalized_values": [row.c4_normalized for row in rows],
        "tail_values": tails,
        "tail_decreasing": bool(
            all(b <= a for a, b in zip(tails, tails[1:]))
        ) if len(tails) > 1 else None,
        "kappa_rule": dataclasses.asdict(config.kappa),
    }


# ---------------------------------------------------------------------------
# experiment runners


def _validate_grid(config: ExperimentConfig) -> list:
    """Admissibility of every size in the grid, before anything else runs."""
    triples = []
    for L, n in zip(config.L_values, config.sizes()):
        triple = config.family.triple(n)
        report = check_frequency_admissibility(triple)
        if not report.valid:
            raise InvalidKernelError(
                f"family is inadmissible at L = {L} (N = {n}):\n{report.summary()}"
            )
        triples.append(triple)
    return triples


def _family_translation(config: ExperimentConfig):
    spacing = config.grid_spacing

    def family(L: float) -> TranslationKernel:
        n = round(L / spacing)
        kernel = synthesize_kernel(config.family.triple(int(n)))
        return dataclasses.replace(kernel, h=spacing)

    return family


def _statistic_gates(
    row_label: str,
    batch: SampleBatch,
    exact_mean: float,
    exact_var: float,
    c4: float,
    replicas: int,
) -> tuple:
    """Breakdown-rate and 5-standard-error moment gates; returns kept stats."""
    n_disc = len(batch.discarded)
    if n_disc / replicas > MAX_BREAKDOWN_FRACTION:
        raise StatisticalAcceptanceError(
            f"{row_label}: {n_disc} of {replicas} replicas hit numerical "
            f"breakdown (> {MAX_BREAKDOWN_FRACTION:.1%})"
        )
    values = batch.statistic_values[batch.kept_indices]
    kept = values.shape[0]
    if kept < 100:
        raise DegenerateConfigError(
            f"{row_label}: only {kept} kept replicas; the normality test "
            "needs at least 100"
        )
    emp_mean = float(np.mean(values))
    emp_var = float(np.var(values, ddof=1))
    se_mean = math.sqrt(exact_var / kept)
    gate = MOMENT_GATE_SE * se_mean
    if abs(emp_mean - exact_mean) > gate:
        raise StatisticalAcceptanceError(
            f"{row_label}: empirical mean {emp_mean!r} deviates from the exact "
            f"mean {exact_mean!r} by more than {MOMENT_GATE_SE:.0f} standard "
            f"errors ({gate!r})"
        )
    var_of_var = max((c4 + 2.0 * exact_var**2) / kept, 0.0)
    gate_var = MOMENT_GATE_SE * math.sqrt(var_of_var)
    if abs(emp_var - exact_var) > gate_var:
        raise StatisticalAcceptanceError(
            f"{row_label}: empirical variance {emp_var!r} deviates from the "
            f"exact variance {exact_var!r} by more than {MOMENT_GATE_SE:.0f} "
            f"standard errors ({gate_var!r})"
        )
    return values, emp_mean, emp_var


def _finish_row(
    L: float,
    n: int,
    batch: SampleBatch,
    kernel_j,
    f: TestFunction,
    translation: TranslationKernel,
    exact_mean: float,
    series: CumulantSeries,
    config: ExperimentConfig,
    tail: float,
) -> CltRow:
    exact_var = series.order(2)
    if exact_var < VARIANCE_FLOOR:
        raise DegenerateConfigError(
            f"L = {L}: exact variance {exact_var!r} is below {VARIANCE_FLOOR}; "
            "the standardized statistic is ill-defined"
        )
    c3n = series.order(3) / exact_var**1.5
    c4n = series.order(4) / exact_var**2
    values, emp_mean, emp_var = _statistic_gates(
        f"L = {L}", batch, exact_mean, exact_var, series.order(4), config.replicas
    )
    standardized = (values - exact_mean) / math.sqrt(exact_var)
    ks_stat, ks_p = normality_test(standardized)
    return CltRow(
        L=float(L),
        N=n,
        exact_mean=exact_mean,
        exact_var=exact_var,
        sigma_squared=sigma_squared(translation),
        sup_abs_f=float(np.max(np.abs(f.values))),
        exact_mean_abs_f=expectation(kernel_j, f.abs()),
        c3_normalized=c3n,
        c4_normalized=c4n,
        empirical_mean=emp_mean,
        empirical_variance=emp_var,
        ks_statistic=ks_stat,
        ks_pvalue=ks_p,
        tail_diagnostic=tail,
        cumulant_series=series,
        standardized=standardized,
        discarded=len(batch.discarded),
    )


def run_clt_experiment(config: ExperimentConfig) -> CltReport:
    """Run the counting-measure central-limit experiment over the size grid."""
    if config.mode != "clt":
        raise ValueError("config was parsed for a different mode")
    if config.grid_spacing != 1.0:
        raise DegenerateConfigError(
            "clt mode uses the counting measure; grid_spacing must be 1"
        )
    triples = _validate_grid(config)
    family = _family_translation(config)
    nmax_eff = max(config.nmax, 4)
    rows = []
    for index, (L, n, triple) in enumerate(zip(config.L_values, config.sizes(), triples)):
        space = SplitSpace.counting(n, n)
        f = build_two_sided_function(config.test_function, space)
        if not np.any(f.values):
            raise DegenerateConfigError("test function is identically zero")
        translation = synthesize_kernel(triple)
        kernel_j = to_jkernel(translation, space)
        exact_mean = expectation(kernel_j, f)
        series = cumulants(kernel_j, f, nmax_eff)
        tail = tail_diagnostic(family, config.kappa, float(L))
        logger.info(
            "clt L=%s: exact mean %.6g, exact var %.6g; sampling %d replicas",
            L, exact_mean, series.order(2), config.replicas,
        )
        batch = sample_torus_batch(
            triple,
            config.replicas,
            config.seed,
            stream=index,
            f=f,
            group_size=config.group_size,
        )
        rows.append(
            _finish_row(
                L, n, batch, kernel_j, f, translation, exact_mean, series, config, tail
            )
        )
    return CltReport(
        mode="clt", rows=rows, config=config,
        diagnostics=clt_hypothesis_diagnostics(rows, config),
    )


def run_scaling_experiment(config: ExperimentConfig) -> CltReport:
    """Run the signed-statistic scaling experiment over the size grid.

    The profile is sampled on the unit grid and applied with opposite signs
    on the two sides; point weights are Riemann weights (the grid spacing),
    so the closed-form signed-mean identity must reproduce the exact trace
    mean at every size — the run asserts that to 1e-9 relative.
    """
    if config.mode != "scaling":
        raise ValueError("config was parsed for a different mode")
    triples = _validate_grid(config)
    family = _family_translation(config)
    nmax_eff = max(config.nmax, 4)
    spacing = config.grid_spacing
    rows = []
    for index, (L, n, triple) in enumerate(zip(config.L_values, config.sizes(), triples)):
        space = SplitSpace(
            n1=n, n2=n, weights=np.full(2 * n, spacing), h=spacing, d=1
        )
        profile = build_profile(config.test_function, n)
        if not np.any(profile):
            raise DegenerateConfigError("scaling profile is identically zero")
        f = TestFunction(space, np.concatenate([profile, -profile]))
        translation = dataclasses.replace(synthesize_kernel(triple), h=spacing)
        kernel_j = to_jkernel(synthesize_kernel(triple), space)
        sigma_sq = sigma_squared(translation)
        if sigma_sq < VARIANCE_FLOOR:
            raise DegenerateConfigError(
                f"L = {L}: limiting variance density {sigma_sq!r} vanishes"
            )
        exact_mean = expectation(kernel_j, f)
        identity_mean = signed_mean_identity(translation, profile, float(L), 1.0 / n)
        scale_ref = max(abs(exact_mean), abs(identity_mean), 1e-30)
        if abs(exact_mean - identity_mean) > 1e-9 * scale_ref:
            raise ArithmeticError(
                f"L = {L}: signed-mean identity {identity_mean!r} disagrees "
                f"with the exact mean {exact_mean!r}"
            )
        series = cumulants(kernel_j, f, nmax_eff)
        tail = tail_diagnostic(family, config.kappa, float(L))
        logger.info(
            "scaling L=%s: identity mean %.6g, exact var %.6g; sampling %d replicas",
            L, identity_mean, series.order(2), config.replicas,
        )
        if spacing == 1.0:
            batch = sample_torus_batch(
                triple, config.replicas, config.seed,
                stream=index, f=f, group_size=config.group_size,
            )
        else:
            batch = sample_jdpp_batch(
                kernel_j, config.replicas, config.seed,
                stream=index, f=f, group_size=config.group_size,
            )
        rows.append(
            _finish_row(
                L, n, batch, kernel_j, f, translation, identity_mean, series, config, tail
            )
        )
    report = CltReport(
        mode="scaling", rows=rows, config=config,
        diagnostics=clt_hypothesis_diagnostics(rows, config),
    )
    # How close the exact variance runs to its asymptote sigma^2 L ||f||^2 —
    # purely informational, mirrored into the report diagnostics.
    asymptote = []
    for row, n in zip(rows, config.sizes()):
        profile = build_profile(config.test_function, n)
        limit = row.sigma_squared * float(row.L) * float(np.sum(profile**2)) / n
        asymptote.append(row.exact_var / limit if limit > 0 else float("inf"))
    report.diagnostics["variance_over_asymptote"] = asymptote
    return report


def run_experiment(config: ExperimentConfig) -> CltReport:
    """Dispatch on the configured mode."""
    if config.mode == "clt":
        return run_clt_experiment(config)
    return run_scaling_experiment(config)


# ---------------------------------------------------------------------------
# report emission


def _format_cell(name: str, value) -> str:
    if name in ("N", "discarded"):
        return str(int(value))
    value = float(value)
    if name == "L" and value.is_integer():
        return str(int(value))
    return repr(value)


def emit_report(
    report: CltReport,
    output_dir=None,
    histograms: bool = True,
    figures: bool = False,
) -> list:
    """Write the delimited report, its JSON mirror, and optional extras.

    Produces ``report.csv`` (fixed column order, shortest-round-trip float
    formatting, hence byte-deterministic for identical runs), ``report.json``
    (same cells plus diagnostics and config echo), per-size standardized
    histogram files ``hist_L{L}.csv`` on a fixed [-6, 6] x 96 grid when
    ``histograms`` is set, and rendered figures when ``figures`` is set.
    Returns the list of written paths.
    """
    if not report.rows:
        raise ValueError("cannot emit an empty report")
    out = output_dir if output_dir is not None else report.config.output
    os.makedirs(out, exist_ok=True)
    written = []

    csv_path = os.path.join(out, "report.csv")
    lines = [",".join(REPORT_COLUMNS)]
    for row in report.rows:
        cells = row.cells()
        lines.append(",".join(_format_cell(name, cells[name]) for name in REPORT_COLUMNS))
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    written.append(csv_path)

    edges = np.linspace(*HISTOGRAM_RANGE, HISTOGRAM_BINS + 1)
    outside = []
    hist_rows = []
    for row in report.rows:
        counts, _ = np.histogram(row.standardized, bins=edges)
        inside = int(counts.sum())
        outside.append(int(row.standardized.shape[0] - inside))
        hist_rows.append(counts)
    if histograms:
        for row, counts in zip(report.rows, hist_rows):
            label = _format_cell("L", row.L)
            path = os.path.join(out, f"hist_L{label}.csv")
            total = row.standardized.shape[0]
            width = edges[1] - edges[0]
            hist_lines = ["bin_left,bin_right,count,density"]
            for b in range(HISTOGRAM_BINS):
                density = counts[b] / (total * width) if total else 0.0
                hist_lines.append(
                    f"{edges[b]!r},{edges[b + 1]!r},{int(counts[b])},{density!r}"
                )
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("\n".join(hist_lines) + "\n")
            written.append(path)

    json_path = os.path.join(out, "report.json")
    payload = {
        "mode": report.mode,
        "columns": list(REPORT_COLUMNS),
        "rows": [
            {name: row.cells()[name] for name in REPORT_COLUMNS} for row in report.rows
        ],
        "discarded_per_row": [row.discarded for row in report.rows],
        "standardized_outside_histogram_range": outside,
        "cumulants": [
            [float(v) for v in row.cumulant_series.values] for row in report.rows
        ],
        "diagnostics": report.diagnostics,
        "config": {
            "mode": report.config.mode,
            "L_values": list(report.config.L_values),
            "grid_spacing": report.config.grid_spacing,
            "replicas": report.config.replicas,
            "seed": report.config.seed,
            "nmax": report.config.nmax,
            "group_size": report.config.group_size,
            "family": dataclasses.asdict(report.config.family) | {
                "g_on": [report.config.family.g_on.real, report.config.family.g_on.imag],
                "g_off": [report.config.family.g_off.real, report.config.family.g_off.imag],
            },
            "test_function": report.config.test_function,
            "kappa": dataclasses.asdict(report.config.kappa),
        },
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, allow_nan=False)
        fh.write("\n")
    written.append(json_path)

    if figures:
        from . import plots

        written.extend(plots.render_report_figures(report, out))
    return written
