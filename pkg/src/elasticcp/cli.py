"""Command-line interface: ``elasticcp {detect,simulate,benchmark,align}``.

Exit codes: 0 success, 2 invalid input, 3 degenerate data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .changepoint import ELASTIC_METHODS, METHODS, TestConfig, default_mc_reps, run_method
from .errors import DegenerateDataError, DegenerateGeometryError, ElasticError, InvalidInputError
from .fpca import parse_selector
from .functions import SmoothingConfig, box_smooth, srvf_inverse
from .io import columns_csv, dataset_csv, dumps, read_dataset, result_document, warp_original
from .karcher import karcher_mean_align
from .simgen import DESIGNS, SimSpec, generate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_NUMERICAL = 4

log = logging.getLogger("elasticcp")


def _config(args) -> TestConfig:
    return TestConfig(
        alpha=args.alpha,
        mc_reps=args.mc_reps if args.mc_reps is not None else default_mc_reps(),
        mc_grid=args.mc_grid,
        component_selector=parse_selector(args.components),
        eigen_truncation=args.eigen_truncation,
        rng_seed=args.seed,
        prefix_mode=args.prefix_mode,
        lambda2_permutations=args.lambda2_permutations,
        limit_grid=args.limit_grid,
    )


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def write_plot_data(directory, result, fs):
    """CSV files behind the usual figures: CUSUM trace, segment means, alignment."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    labels = [f.label for f in fs]
    grid = fs[0].grid
    ks = np.arange(1, result.n + 1)
    (directory / "cusum.csv").write_text(columns_csv(ks, [result.cusum_trace], ["cusum"], time_name="k"))
    if result.mean_before is not None:
        if hasattr(result.mean_before, "label"):
            series = [result.mean_before.values, result.mean_after.values, result.delta_hat.values]
        else:
            width = grid.domain_max - grid.domain_min
            series = [
                warp_original(result.mean_before),
                warp_original(result.mean_after),
                np.asarray(result.delta_hat) * width,
            ]
        (directory / "means.csv").write_text(
            columns_csv(grid.original, series, ["before", "after", "delta"])
        )
    ar = result.alignment
    if ar is not None:
        (directory / "aligned.csv").write_text(dataset_csv(ar.aligned_f))
        warps = [warp_original(g) for g in ar.warps]
        (directory / "warps.csv").write_text(columns_csv(grid.original, warps, labels))


def _read_input(args):
    fs = read_dataset(args.input, args.format)
    if args.smooth_passes:
        cfg = SmoothingConfig(args.smooth_window, args.smooth_passes)
        fs = [box_smooth(f, cfg) for f in fs]
    return fs


def cmd_detect(args) -> int:
    fs = _read_input(args)
    cfg = _config(args)
    result = run_method(args.method, fs, cfg)
    doc = result_document(result, cfg, [f.label for f in fs], fs[0].grid, __version__)
    _emit(dumps(doc), args.out)
    if args.plot_data:
        write_plot_data(args.plot_data, result, fs)
    if result.degenerate:
        log.error("data carry no variability; test is degenerate")
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = SimSpec(args.design, args.n, args.changepoint, args.T, args.seed, args.null_base)
    fs = generate(spec)
    text = dataset_csv(fs)
    _emit(text, args.out)
    print(
        f"design={spec.design} n={spec.n} changepoint={spec.changepoint} "
        f"T={spec.T} seed={spec.rng_seed}",
        file=sys.stderr,
    )
    return EXIT_OK


def _benchmark_replicate(job):
    spec, methods, cfg, workers = job
    fs = generate(spec)
    rows = []
    alignment = None
    align_time = 0.0
    if any(m in ELASTIC_METHODS for m in methods):
        start = time.perf_counter()
        alignment = karcher_mean_align(
            fs, tol=cfg.karcher_tol, max_iter=cfg.karcher_max_iter, workers=workers
        )
        align_time = time.perf_counter() - start
    for method in methods:
        start = time.perf_counter()
        try:
            r = run_method(method, fs, cfg, alignment=alignment)
            k_star, p, detected = r.k_star, r.p_value, r.p_value <= cfg.alpha
        except DegenerateDataError:
            k_star, p, detected = None, 1.0, False
        elapsed = time.perf_counter() - start
        if method in ELASTIC_METHODS:
            elapsed += align_time
        rows.append((spec.rng_seed, method, detected, k_star, p, elapsed))
    return rows


def run_benchmark(spec: SimSpec, reps: int, methods, cfg: TestConfig, jobs: int = 1):
    """Rows ``(seed, method, detected, k_star, p_value, runtime)``; replicate ``r`` uses seed ``spec.rng_seed + r``."""
    # parallel replicates each align on a single thread
    workers = 1 if jobs > 1 else None
    work = [
        (
            SimSpec(spec.design, spec.n, spec.changepoint, spec.T, spec.rng_seed + r, spec.null_base),
            tuple(methods),
            cfg,
            workers,
        )
        for r in range(reps)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            chunks = list(pool.map(_benchmark_replicate, work))
    else:
        chunks = [_benchmark_replicate(w) for w in work]
    return [row for chunk in chunks for row in chunk]


def benchmark_summary(rows, methods) -> list[str]:
    lines = []
    for method in methods:
        sel = [r for r in rows if r[1] == method]
        rate = np.mean([r[2] for r in sel])
        ks = [r[3] for r in sel if r[2] and r[3] is not None]
        med = f"{np.median(ks):g}" if ks else "nan"
        iqr = f"{np.subtract(*np.percentile(ks, [75, 25])):g}" if ks else "nan"
        lines.append(f"{method:22s} detection_rate={rate:.3f} median_k_star={med} iqr_k_star={iqr}")
    return lines


def cmd_benchmark(args) -> int:
    if args.reps < 1:
        raise InvalidInputError("--reps must be at least 1")
    methods = args.methods.split(",")
    for m in methods:
        if m not in METHODS:
            raise InvalidInputError(f"unknown method {m!r}")
    spec = SimSpec(args.design, args.n, args.changepoint, args.T, args.seed, args.null_base)
    cfg = _config(args)
    rows = run_benchmark(spec, args.reps, methods, cfg, args.jobs)
    header = ["seed", "method", "detected", "k_star", "p_value"]
    if not args.no_timing:
        header.append("runtime")
    lines = [",".join(header)]
    for seed, method, detected, k, p, elapsed in rows:
        fields = [str(seed), method, str(int(detected)), "" if k is None else str(k), repr(p)]
        if not args.no_timing:
            fields.append(f"{elapsed:.4f}")
        lines.append(",".join(fields))
    _emit("\n".join(lines) + "\n", args.out)
    for line in benchmark_summary(rows, methods):
        print(line, file=sys.stderr)
    return EXIT_OK


def cmd_align(args) -> int:
    fs = _read_input(args)
    ar = karcher_mean_align(fs, tol=args.tol, max_iter=args.max_iter)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = fs[0].grid
    labels = [f.label for f in fs]
    (out / "aligned.csv").write_text(dataset_csv(ar.aligned_f))
    (out / "warps.csv").write_text(columns_csv(grid.original, [warp_original(g) for g in ar.warps], labels))
    mean = srvf_inverse(ar.mean_q, "karcher_mean")
    (out / "mean.csv").write_text(columns_csv(grid.original, [mean.values], ["karcher_mean"]))
    print(f"iterations={ar.iterations} converged={ar.converged}", file=sys.stderr)
    return EXIT_OK


def _add_test_options(p):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0, help="Monte-Carlo seed (and base data seed)")
    p.add_argument("--mc-reps", type=int, default=None, help="default 10000 or $ELASTICCP_MC_REPS")
    p.add_argument("--mc-grid", type=int, default=1001)
    p.add_argument("--components", default="0.95", help="variance fraction (<1) or fixed count")
    p.add_argument("--eigen-truncation", type=int, default=50)
    p.add_argument("--prefix-mode", choices=("global", "realign"), default="global")
    p.add_argument("--lambda2-permutations", type=int, default=0)
    p.add_argument(
        "--limit-grid",
        choices=("sample", "continuous"),
        default="sample",
        help="monitor simulated bridges at k/n (default) or on --mc-grid points",
    )


def _add_smoothing_options(p):
    p.add_argument("--smooth-window", type=int, default=3, help="box filter width in samples (odd)")
    p.add_argument("--smooth-passes", type=int, default=0, help="box filter passes; 0 disables smoothing")


def _add_design_options(p):
    p.add_argument("--design", choices=DESIGNS, default="amplitude-change")
    p.add_argument("--null-base", choices=DESIGNS[:3], default="amplitude-change")
    p.add_argument("--n", type=int, default=75)
    p.add_argument("--changepoint", type=int, default=30)
    p.add_argument("--T", type=int, default=101)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elasticcp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="test a dataset for a changepoint")
    p.add_argument("input")
    p.add_argument("--format", choices=("csv", "json"))
    _add_smoothing_options(p)
    p.add_argument("--method", choices=sorted(METHODS), default="elastic-amp")
    p.add_argument("--out")
    p.add_argument("--plot-data", metavar="DIR")
    _add_test_options(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="write a simulated dataset as CSV")
    _add_design_options(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="replicate a simulation design")
    _add_design_options(p)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--methods", default="elastic-amp-pca,cross-sectional")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-timing", action="store_true", help="omit the runtime column")
    p.add_argument("--out")
    _add_test_options(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("align", help="Karcher-mean alignment of a dataset")
    p.add_argument("input")
    p.add_argument("--format", choices=("csv", "json"))
    _add_smoothing_options(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; alignment is deterministic")
    p.set_defaults(func=cmd_align)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DegenerateDataError, DegenerateGeometryError) as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ElasticError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
