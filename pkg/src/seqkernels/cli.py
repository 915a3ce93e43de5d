"""Command-line interface: ``seqkernels <command> [options]``.

Exit codes: 0 success, 1 numeric or validation failure, 2 usage error.
"""

import argparse
import json
import os
import statistics
import sys
import time
import warnings

import numpy as np

from . import __version__
from .data import gen_sine_cosine, gen_sine_square_spike, parse_dataset, write_dataset
from .estimator import SequenceKernel
from .exceptions import GrowthWarning, SeqKernelError
from .gram import build_gram, check_psd, export_csv, save_gram
from .kernels import (
    GlobalAlignmentConfig,
    StructureKernelParams,
    config_to_dict,
    global_alignment_kernel,
    parameter_names,
    sequence_kernel,
    structure_matrix,
)
from .learn.gp import fit_hyperparameters
from .learn.pca import kernel_pca
from .model_selection import C_GRID, kernel_grid, nested_cv

# panels of the structure-matrix figure: one exponential, four path kernels
FIGURE_PATH_PANELS = [(0.3, 0.3), (0.33, 0.35), (0.37, 0.35), (0.37, 0.3)]
FIGURE_ALPHA = 50.0
FIGURE_L_MAX = 100


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="worker threads (results do not depend on it)")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction,
                   default=None, help="normalize kernel values to unit self-similarity")
    p.add_argument("--out", help="output path")
    return p


def _kernel_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("kernel")
    g.add_argument("--kernel", default="path",
                   choices=["path", "exponential", "polynomial", "factorial", "ga"],
                   help="structure kernel, or ga for the Global Alignment baseline")
    g.add_argument("--symbol", default="rbf", choices=["rbf", "linear", "delta"])
    g.add_argument("--sigma", type=float, help="rbf / ga bandwidth")
    g.add_argument("--chv", type=float, help="path kernel horizontal/vertical weight")
    g.add_argument("--cd", type=float, help="path kernel diagonal weight")
    g.add_argument("--alpha", type=float, help="exponential structure width")
    g.add_argument("--poly-c", type=float, default=1.0)
    g.add_argument("--poly-degree", type=int, default=2)
    g.add_argument("--fact-d", type=int, default=0)
    return p


_DEFAULTS = {"sigma": 1.0, "c_hv": 0.3, "c_d": 0.3, "alpha": 1.0}


def _explicit_params(args):
    """Kernel parameters the user set on the command line."""
    given = {"sigma": args.sigma, "c_hv": args.chv, "c_d": args.cd,
             "alpha": args.alpha}
    return {k: v for k, v in given.items() if v is not None}


def _kernel_estimator(args, normalize, **overrides):
    params = {**_DEFAULTS, **_explicit_params(args), **overrides}
    return SequenceKernel(structure=args.kernel, symbol=args.symbol,
                          c=args.poly_c, degree=args.poly_degree,
                          d_fact=args.fact_d, normalize=normalize,
                          n_jobs=args.threads, **params)


def _normalize_flag(args, default):
    return default if args.normalize is None else args.normalize


def _emit_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _report_header(args, command):
    return {"command": command, "seed": args.seed, "version": __version__}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_gram(args):
    ds = parse_dataset(args.dataset)
    cfg = _kernel_estimator(args, _normalize_flag(args, False)).config
    G = build_gram(ds.sequences, cfg, ids=ds.ids, n_jobs=args.threads)
    out = args.out or "gram.sqkg"
    save_gram(G, out)
    if args.csv:
        export_csv(G, args.csv)
    report = check_psd(G, args.tol)
    print(json.dumps({**_report_header(args, "gram"), "n": G.n, "out": out,
                      "config": config_to_dict(cfg), "checksum": G.checksum,
                      "psd": report.to_dict()}, indent=2, sort_keys=True))
    return 0 if report.passed else 1


def _write_matrix_csv(values, fh):
    for row in values:
        fh.write(",".join(f"{float(v):.17g}" for v in row) + "\n")


def cmd_structure_dump(args):
    if args.lmax > 512:
        raise SeqKernelError(f"--lmax must be <= 512, got {args.lmax}")
    if args.figure:
        outdir = args.out or "structure_panels"
        os.makedirs(outdir, exist_ok=True)
        panels = [("exponential", StructureKernelParams(
            "exponential", alpha=args.alpha or FIGURE_ALPHA))]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GrowthWarning)
            panels += [(f"path_chv{chv:g}_cd{cd:g}",
                        StructureKernelParams("path", c_hv=chv, c_d=cd))
                       for chv, cd in FIGURE_PATH_PANELS]
        for name, params in panels:
            M = structure_matrix(params, args.lmax)
            with open(os.path.join(outdir, name + ".csv"), "w",
                      encoding="utf-8") as fh:
                _write_matrix_csv(M.values, fh)
            print(os.path.join(outdir, name + ".csv"))
        return 0
    kind = args.kernel
    if kind == "ga":
        raise SeqKernelError("the Global Alignment kernel has no structure matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GrowthWarning)
        params = StructureKernelParams(
            kind, alpha=args.alpha if args.alpha is not None else 1.0,
            c=args.poly_c, degree=args.poly_degree, d_fact=args.fact_d,
            c_hv=args.chv if args.chv is not None else 0.3,
            c_d=args.cd if args.cd is not None else 0.3)
    M = structure_matrix(params, args.lmax)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            _write_matrix_csv(M.values, fh)
    else:
        _write_matrix_csv(M.values, sys.stdout)
    return 0


def _grams_for_grid(ds, args, normalize):
    fixed = _explicit_params(args)
    grid = kernel_grid(args.kernel, args.symbol, ds.sequences, fixed)
    grams = []
    for p in grid:
        est = _kernel_estimator(args, normalize, **p)
        grams.append(build_gram(ds.sequences, est.config,
                                n_jobs=args.threads).values)
    return grid, grams


def _load_or_generate(args):
    if args.dataset:
        ds = parse_dataset(args.dataset)
    elif args.toy == "sine-cosine":
        ds = gen_sine_cosine(args.n_per_class, (args.len_min, args.len_max),
                             args.noise_sd, args.seed)
    else:
        ds = gen_sine_square_spike(args.n_per_class, args.length,
                                   args.noise_sd, args.seed)
    if getattr(args, "labeling", None):
        ds = ds.with_labeling(args.labeling)
    return ds


def cmd_classify(args):
    ds = _load_or_generate(args)
    normalize = _normalize_flag(args, True)
    grid, grams = _grams_for_grid(ds, args, normalize)
    report = nested_cv(grams, grid, ds.labels, C_grid=args.c_grid,
                       n_splits=args.folds, r_out=args.outer_reps,
                       r_in=args.inner_reps, seed=args.seed, tol=args.tol,
                       n_jobs=args.threads)
    base = _kernel_estimator(args, normalize)
    out = {**_report_header(args, "classify"),
           "dataset": ds.summary(),
           "kernel": {"structure": args.kernel, "symbol": args.symbol,
                      "normalize": normalize, "grid_size": len(grid),
                      "base_config": config_to_dict(base.config)},
           "report": report.to_dict(include_timings=args.timings)}
    _emit_json(out, args.out)
    print(report.table(), file=sys.stderr if args.out is None else sys.stdout)
    return 0


def _fit(ds, args, normalize):
    est = _kernel_estimator(args, normalize)
    cfg0 = est.config
    res = fit_hyperparameters(ds.sequences, ds.labels, cfg0, budget=args.budget,
                              noise=args.noise)
    cfg = res.config
    entry = {"labeling": ds.metadata.get("labeling", "labels"),
             "config": config_to_dict(cfg), "noise": res.noise,
             "lml": res.lml, "status": res.status, "n_iter": res.n_iter,
             "parameters": dict(zip(res.parameter_names,
                                    [getattr(cfg.symbol if n == "sigma"
                                             else cfg.structure, n)
                                     for n in res.parameter_names[:-1]]
                                    + [res.noise]))}
    if cfg.structure.kind == "path":
        entry["c_hv"] = cfg.structure.c_hv
        entry["c_d"] = cfg.structure.c_d
        entry["cd_over_chv"] = (cfg.structure.c_d / cfg.structure.c_hv
                                if cfg.structure.c_hv > 0 else None)
    return res, entry


def cmd_fit(args):
    if args.kernel == "ga":
        raise SeqKernelError("the Global Alignment kernel has no gradients")
    normalize = _normalize_flag(args, True)
    ds = _load_or_generate(args)
    parameter_names(_kernel_estimator(args, normalize).config)
    if args.compare:
        if not {"waveform", "spike"} <= set(ds.labelings):
            raise SeqKernelError("--compare needs the sine-square-spike toy data")
        runs = [_fit(ds.with_labeling(name), args, normalize)[1]
                for name in ("waveform", "spike")]
        out = {**_report_header(args, "fit"), "tasks": runs}
        ratios = [r.get("cd_over_chv") for r in runs]
        if None not in ratios:
            # the expected direction is reported, not enforced
            out["diagnostic"] = {
                "waveform_ratio": ratios[0], "spike_ratio": ratios[1],
                "ratio_higher_for_waveform": ratios[0] > ratios[1]}
    else:
        out = {**_report_header(args, "fit"), "tasks": [_fit(ds, args, normalize)[1]]}
    _emit_json(out, args.out)
    return 0


def cmd_embed(args):
    ds = _load_or_generate(args)
    normalize = _normalize_flag(args, True)
    cfg = _kernel_estimator(args, normalize).config
    if args.fit_budget > 0:
        cfg = fit_hyperparameters(ds.sequences, ds.labels, cfg,
                                  budget=args.fit_budget, noise=args.noise).config
    G = build_gram(ds.sequences, cfg, ids=ds.ids, n_jobs=args.threads)
    res = kernel_pca(G, args.components)
    lines = ["id,label," + ",".join(f"pc{k + 1}" for k in range(args.components))]
    for ident, label, row in zip(ds.ids, ds.labels, res.coordinates):
        lines.append(f"{ident},{label}," + ",".join(f"{v:.17g}" for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(json.dumps({"config": config_to_dict(cfg),
                      "eigenvalues": res.eigenvalues.tolist()}, sort_keys=True),
          file=sys.stderr)
    return 0


def time_pair(fn, repeats):
    """Median wall-clock seconds of ``repeats`` calls to ``fn``."""
    fn()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def cmd_bench(args):
    if max(args.lengths) > 4096:
        raise SeqKernelError("lengths must be <= 4096")
    rng = np.random.default_rng(args.seed)
    normalize = _normalize_flag(args, False)
    est = _kernel_estimator(args, normalize)
    cfg = est.config
    L = max(args.lengths)
    M = None if isinstance(cfg, GlobalAlignmentConfig) else structure_matrix(
        cfg.structure, L)
    rows = []
    for n in args.lengths:
        s = rng.normal(size=(n, args.dim))
        t = rng.normal(size=(n, args.dim))
        if M is None:
            value = global_alignment_kernel(s, t, cfg.sigma, normalize=normalize)
            sec = time_pair(lambda: global_alignment_kernel(
                s, t, cfg.sigma, normalize=normalize), args.repeats)
        else:
            value = sequence_kernel(s, t, cfg, M)
            sec = time_pair(lambda: sequence_kernel(s, t, cfg, M), args.repeats)
        row = {"length": n, "seconds": sec, "value": value}
        if args.with_ga and M is not None:
            sigma = cfg.symbol.sigma
            row["ga_value"] = global_alignment_kernel(s, t, sigma, log=True)
            row["ga_value_is_log"] = True
            row["ga_seconds"] = time_pair(
                lambda: global_alignment_kernel(s, t, sigma, log=True),
                args.repeats)
        rows.append(row)
    for prev, cur in zip(rows, rows[1:]):
        cur["ratio"] = cur["seconds"] / prev["seconds"]
    print(f"{'length':>7} {'seconds':>12} {'ratio':>7}"
          + (f" {'ga_seconds':>12}" if args.with_ga and M is not None else ""),
          file=sys.stderr)
    for r in rows:
        line = f"{r['length']:>7} {r['seconds']:>12.3e} {r.get('ratio', float('nan')):>7.2f}"
        if "ga_seconds" in r:
            line += f" {r['ga_seconds']:>12.3e}"
        print(line, file=sys.stderr)
    _emit_json({**_report_header(args, "bench"), "config": config_to_dict(cfg),
                "rows": rows}, args.out)
    return 0


def cmd_gen_toy(args):
    if args.toy == "sine-cosine":
        ds = gen_sine_cosine(args.n_per_class, (args.len_min, args.len_max),
                             args.noise_sd, args.seed)
    else:
        ds = gen_sine_square_spike(args.n_per_class, args.length,
                                   args.noise_sd, args.seed)
        if args.labeling:
            ds = ds.with_labeling(args.labeling)
    header = json.dumps(ds.metadata, sort_keys=True)
    if args.out:
        write_dataset(ds, args.out, header=header)
    else:
        raise SeqKernelError("gen-toy needs --out")
    print(json.dumps({"out": args.out, **ds.summary()}, sort_keys=True))
    return 0


def _toy_arguments(p, required):
    if required:
        p.add_argument("toy", choices=["sine-cosine", "sine-square-spike"])
    else:
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("dataset", nargs="?", help="SEQT dataset file")
        src.add_argument("--toy", choices=["sine-cosine", "sine-square-spike"],
                         help="generate a toy dataset instead of reading one")
    p.add_argument("--n-per-class", type=_positive_int, default=10)
    p.add_argument("--len-min", type=int, default=20)
    p.add_argument("--len-max", type=int, default=60)
    p.add_argument("--length", type=int, default=100,
                   help="sequence length of the sine-square-spike data")
    p.add_argument("--noise-sd", type=float, default=0.1)
    p.add_argument("--labeling", choices=["waveform", "spike"],
                   help="labeling of the sine-square-spike data")


def build_parser():
    common = _common_parser()
    kernel = _kernel_parser()
    parser = argparse.ArgumentParser(
        prog="seqkernels", description="Decomposable sequence kernels.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gram", parents=[common, kernel],
                       help="compute a Gram matrix and check it is PSD")
    p.add_argument("dataset")
    p.add_argument("--csv", help="also export the matrix as CSV")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("structure-dump", parents=[common, kernel],
                       help="write a structure-kernel matrix as CSV")
    p.add_argument("--lmax", type=_positive_int, default=FIGURE_L_MAX)
    p.add_argument("--figure", action="store_true",
                   help="write the five reference panels into the --out directory")
    p.set_defaults(func=cmd_structure_dump)

    p = sub.add_parser("classify", parents=[common, kernel],
                       help="nested cross-validated SVM accuracy")
    _toy_arguments(p, required=False)
    p.add_argument("--folds", type=_positive_int, default=3)
    p.add_argument("--outer-reps", type=_positive_int, default=3)
    p.add_argument("--inner-reps", type=_positive_int, default=20)
    p.add_argument("--c-grid", type=_float_list, default=list(C_GRID))
    p.add_argument("--tol", type=float, default=1e-3, help="SMO tolerance")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock times in the JSON report")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("embed", parents=[common, kernel],
                       help="kernel PCA coordinates as CSV")
    _toy_arguments(p, required=False)
    p.add_argument("-p", "--components", type=_positive_int, default=2)
    p.add_argument("--fit-budget", type=int, default=0,
                   help="fit kernel parameters by marginal likelihood first")
    p.add_argument("--noise", type=float, default=0.1)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("fit", parents=[common, kernel],
                       help="fit kernel parameters by GP marginal likelihood")
    _toy_arguments(p, required=False)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--compare", action="store_true",
                   help="fit both labelings of the sine-square-spike data")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gen-toy", parents=[common],
                       help="write a toy dataset in SEQT format")
    _toy_arguments(p, required=True)
    p.set_defaults(func=cmd_gen_toy)

    p = sub.add_parser("bench", parents=[common, kernel],
                       help="time single kernel evaluations against length")
    p.add_argument("--lengths", type=_int_list, default=[1, 64, 128, 256, 512])
    p.add_argument("--repeats", type=_positive_int, default=21)
    p.add_argument("--dim", type=_positive_int, default=1)
    p.add_argument("--with-ga", action=argparse.BooleanOptionalAction,
                   default=True, help="also time the Global Alignment kernel")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SeqKernelError, ValueError, OSError) as exc:
        print(f"seqkernels {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
