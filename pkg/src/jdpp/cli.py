"""Command-line interface.

Subcommands: ``validate-spectrum``, ``cumulants``, ``oracle``, ``sample``,
``clt``, ``scaling``.  Exit codes: 0 success, 2 invalid kernel, 3 degenerate
or malformed configuration (including I/O problems), 4 statistical-acceptance
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .core import InvalidKernelError, load_kernel
from .harness import (
    DegenerateConfigError,
    StatisticalAcceptanceError,
    emit_report,
    load_experiment_config,
    run_experiment,
)
from .moments import cumulants, load_test_function
from .oracle import (
    exact_cumulants,
    exact_statistic_distribution,
    subset_probabilities,
)
from .sampler import sample_jdpp_batch
from .spectral import check_frequency_admissibility, load_spectral_triple

#: Configuration laws with at most this many points are printed in full.
_FULL_DISTRIBUTION_MAX_POINTS = 12


def _cmd_validate_spectrum(args) -> int:
    triple = load_spectral_triple(args.file)
    report = check_frequency_admissibility(triple)
    print(report.summary())
    return 0 if report.valid else 2


def _cmd_cumulants(args) -> int:
    kernel = load_kernel(args.kernel)
    f = load_test_function(args.f, kernel.space)
    series = cumulants(kernel, f, args.nmax)
    print("order,value")
    for n in range(1, series.nmax + 1):
        print(f"{n},{series.order(n)!r}")
    return 0


def _cmd_oracle(args) -> int:
    kernel = load_kernel(args.kernel)
    if args.nmax is not None and args.f is None:
        raise ValueError("--nmax needs --f (cumulants are of the statistic S_f)")
    distribution = subset_probabilities(kernel)
    if args.f is None:
        n = kernel.space.n
        if n <= _FULL_DISTRIBUTION_MAX_POINTS:
            print("configuration,probability")
            for mask in sorted(distribution.probabilities):
                print(f"{mask:#x},{distribution.probabilities[mask]!r}")
        else:
            probs = distribution.probabilities
            negative = sum(1 for p in probs.values() if p < 0.0)
            print("quantity,value")
            print(f"points,{n}")
            print(f"configurations,{len(probs)}")
            print(f"total_probability,{distribution.total!r}")
            print(f"min_probability,{distribution.min_probability!r}")
            print(f"negative_atoms,{negative}")
        return 0
    f = load_test_function(args.f, kernel.space)
    atoms = exact_statistic_distribution(distribution, f)
    if args.nmax is None:
        print("value,probability")
        for value, probability in atoms:
            print(f"{value!r},{probability!r}")
    else:
        series = exact_cumulants(atoms, args.nmax)
        print("order,value")
        for n in range(1, series.nmax + 1):
            print(f"{n},{series.order(n)!r}")
    return 0


def _cmd_sample(args) -> int:
    kernel = load_kernel(args.kernel)
    f = load_test_function(args.f, kernel.space) if args.f else None
    batch = sample_jdpp_batch(kernel, args.n, args.seed, f=f)
    lines = []
    if f is None:
        lines.append("replica_index,configuration")
        for i, mask in enumerate(batch.configurations):
            cell = "breakdown" if mask is None else f"{mask:#x}"
            lines.append(f"{i},{cell}")
    else:
        lines.append("replica_index,configuration,statistic")
        for i, mask in enumerate(batch.configurations):
            if mask is None:
                lines.append(f"{i},breakdown,")
            else:
                lines.append(f"{i},{mask:#x},{float(batch.statistic_values[i])!r}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    if batch.discarded:
        print(
            f"warning: {len(batch.discarded)} of {batch.replicas} replicas "
            "hit numerical breakdown (marked in the output)",
            file=sys.stderr,
        )
    print(f"wrote {batch.replicas} replicas to {args.out}")
    return 0


def _run_harness(args, mode: str) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    config = load_experiment_config(args.config, mode)
    report = run_experiment(config)
    written = emit_report(
        report,
        output_dir=args.output,
        histograms=not args.no_histograms,
        figures=not args.no_figures,
    )
    for row in report.rows:
        print(
            f"L={row.L:g} N={row.N} mean={row.exact_mean:.6g} "
            f"var={row.exact_var:.6g} c3n={row.c3_normalized:.4g} "
            f"c4n={row.c4_normalized:.4g} KS D={row.ks_statistic:.4f} "
            f"p={row.ks_pvalue:.4f}"
        )
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_clt(args) -> int:
    return _run_harness(args, "clt")


def _cmd_scaling(args) -> int:
    return _run_harness(args, "scaling")


def _uint64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jdpp",
        description=(
            "Numerical laboratory for determinantal processes with "
            "J-Hermitian kernels: validation, exact moments, exact sampling, "
            "and central-limit experiments."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "validate-spectrum",
        help="check per-frequency admissibility of a spectral triple file",
    )
    p.add_argument("file", help="spectral triple JSON file")
    p.set_defaults(func=_cmd_validate_spectrum)

    p = sub.add_parser(
        "cumulants", help="exact cumulants of a linear statistic via traces"
    )
    p.add_argument("--kernel", required=True, help="kernel JSON file")
    p.add_argument("--f", required=True, help="test function JSON file")
    p.add_argument("--nmax", required=True, type=int, help="highest order (1-12)")
    p.set_defaults(func=_cmd_cumulants)

    p = sub.add_parser(
        "oracle",
        help=(
            "brute-force configuration law; with --f the statistic "
            "distribution; with --nmax its cumulants"
        ),
    )
    p.add_argument("--kernel", required=True, help="kernel JSON file")
    p.add_argument("--f", help="test function JSON file")
    p.add_argument("--nmax", type=int, help="cumulant order cap (needs --f)")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("sample", help="draw reproducible configurations")
    p.add_argument("--kernel", required=True, help="kernel JSON file")
    p.add_argument("--n", required=True, type=int, help="number of replicas")
    p.add_argument("--seed", required=True, type=_uint64, help="64-bit seed")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--f", help="optional test function JSON file")
    p.set_defaults(func=_cmd_sample)

    for mode, helptext in (
        ("clt", "central-limit experiment over a size grid"),
        ("scaling", "signed scaled-statistic experiment over a size grid"),
    ):
        p = sub.add_parser(mode, help=helptext)
        p.add_argument("--config", required=True, help="experiment config JSON file")
        p.add_argument(
            "--output", default=None, help="override the config's output directory"
        )
        p.add_argument(
            "--no-histograms", action="store_true", help="skip histogram CSV files"
        )
        p.add_argument(
            "--no-figures", action="store_true", help="skip rendered figures"
        )
        p.set_defaults(func=_cmd_clt if mode == "clt" else _cmd_scaling)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidKernelError as exc:
        print(f"invalid kernel: {exc}", file=sys.stderr)
        return 2
    except StatisticalAcceptanceError as exc:
        print(f"statistical acceptance failure: {exc}", file=sys.stderr)
        return 4
    except DegenerateConfigError as exc:
        print(f"degenerate configuration: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
