"""Command-line interface: ``memmunmix {gen,unmix,eval,bench,maps}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 every pixel failed.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io as fio
from .baselines import METHODS as BASELINE_METHODS
from .bench import ALL_METHODS, DEFAULT_GRID, METRICS, ExperimentSpec, format_row, run_bench, run_method
from .core import DimensionError
from .metrics import evaluate
from .simgen import SeedError, SimConfig, simulate

log = logging.getLogger("memmunmix")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
REPORT_COLUMNS = ("method", *METRICS, "sre_a_capped", "sre_r_capped", "wall_time_s")


class UsageError(Exception):
    pass


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("UNMIX_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise UsageError(f"UNMIX_THREADS must be an integer, got {env!r}")
    if n < 1:
        raise UsageError("--threads must be >= 1")
    return n


def _suffix(args) -> str:
    return ".csv.gz" if getattr(args, "gzip", False) else ".csv"


def _find(directory: Path, stem: str) -> Path:
    for ext in (".csv", ".csv.gz"):
        p = directory / f"{stem}{ext}"
        if p.exists():
            return p
    raise fio.FormatError(f"{directory}: no {stem}.csv found")


def _parse_grid(text: Optional[str]) -> tuple:
    if text is None:
        return DEFAULT_GRID
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"--grid must be a comma-separated list of numbers, got {text!r}")
    if not vals or any(v < 0 for v in vals):
        raise UsageError("--grid needs at least one nonnegative value")
    return vals


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    snr = None if args.snr is None or np.isinf(args.snr) else float(args.snr)
    cfg = SimConfig(
        seed=args.seed, n_classes=args.classes, atoms_per_class=args.atoms,
        n_pixels=args.pixels, n_bands=args.bands, snr_db=snr,
        max_active_classes=min(5, args.classes),
    )
    bundles, batch = simulate(cfg, args.sim)
    out = Path(args.out)
    sfx = _suffix(args)
    fio.write_bundles(out / f"bundles{sfx}", bundles)
    fio.write_pixels(out / f"pixels{sfx}", batch)
    fio.write_truth(out / f"truth{sfx}", bundles, batch.truth)
    print(f"wrote {bundles.n_atoms} atoms x {bundles.n_bands} bands and {batch.n_pixels} pixels to {out}")
    return EXIT_OK


def _method_params(args) -> dict:
    m = args.method
    if m in ("memm",):
        return {"lambda_a": args.lambda_a, "lambda_b": args.lambda_b}
    if m == "memm_s":
        return {"lambda_a": args.lambda_a}
    if m in ("sunsal", "elitist"):
        return {"lambda_r": args.lambda_r}
    if m == "group":
        return {"lambda_g": args.lambda_g, "lambda_r": args.lambda_r}
    return {}


def cmd_unmix(args) -> int:
    inp = Path(args.input)
    bundles = fio.read_bundles(Path(args.bundles) if args.bundles else _find(inp, "bundles"))
    batch = fio.read_pixels(Path(args.pixels) if args.pixels else _find(inp, "pixels"))
    if batch.n_bands != bundles.n_bands:
        raise DimensionError(f"pixels have {batch.n_bands} bands but the bundles have {bundles.n_bands}")
    run = run_method(args.method, _method_params(args), bundles, batch, None, _threads(args), args.mesma_classes)
    out = Path(args.out)
    sfx = _suffix(args)
    failed = run.failed
    fio.write_matrix(out / f"abundances{sfx}", "abundances", list(bundles.class_names), run.a)
    fio.write_matrix(out / f"multiple_abundances{sfx}", "multiple_abundances", fio.atom_labels(bundles), run.r)
    if "b" in run.extra:
        fio.write_matrix(out / f"bundling{sfx}", "bundling", fio.atom_labels(bundles), run.extra["b"])
        fio.write_objective_traces(out / f"objective_trace{sfx}", run.extra["traces"])
    status = [{"pixel": p, "converged": bool(run.converged[p]), "failed": bool(failed[p])}
              for p in range(batch.n_pixels)]
    fio.write_table(out / f"status{sfx}", "status", status, ("pixel", "converged", "failed"))
    n_conv = int(np.sum(run.converged & ~failed))
    print(f"{args.method}: {batch.n_pixels} pixels, {n_conv} converged, {int(failed.sum())} failed, "
          f"{run.wall_s:.2f}s")
    if batch.n_pixels and failed.all():
        print("error: every pixel failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_eval(args) -> int:
    inp = Path(args.input)
    sol = Path(args.solution) if args.solution else inp
    bundles = fio.read_bundles(Path(args.bundles) if args.bundles else _find(inp, "bundles"))
    truth = None
    tpath = Path(args.truth) if args.truth else None
    if tpath is None:
        try:
            tpath = _find(inp, "truth")
        except fio.FormatError:
            tpath = None
    if tpath is not None:
        truth = fio.read_truth(tpath, bundles)
    _, a = fio.read_matrix(_find(sol, "abundances"), "abundances")
    _, r = fio.read_matrix(_find(sol, "multiple_abundances"), "multiple_abundances")
    if a.shape[0] != bundles.n_classes or r.shape[0] != bundles.n_atoms:
        raise DimensionError(
            f"solution has {a.shape[0]} classes / {r.shape[0]} atoms, bundles have "
            f"{bundles.n_classes} / {bundles.n_atoms}"
        )
    if truth is not None and truth.abundances.shape[1] != a.shape[1]:
        raise DimensionError(f"truth has {truth.abundances.shape[1]} pixels, solution has {a.shape[1]}")
    rep = evaluate(truth, a, r)
    row = {"method": args.label, **rep.row()}
    out = Path(args.out) if args.out else sol
    fio.write_table(out / "report.csv", "report", [row], REPORT_COLUMNS)
    if rep.per_pixel:
        cols = tuple(rep.per_pixel[0].keys())
        fio.write_table(out / "report_pixels.csv", "report_pixels", rep.per_pixel, cols)
    print(format_row({"dataset": "-", "snr_db": None, "params": args.label, **row}))
    if truth is None:
        print("no truth found: only SL_a and SL_r were computed")
    return EXIT_OK


def cmd_bench(args) -> int:
    grid = _parse_grid(args.grid)
    methods = tuple(args.method) if args.method else ALL_METHODS
    datasets = tuple(f"sim{s}" for s in (args.sim or (1, 2)))
    if args.input:
        datasets = ("file",)
    inp = Path(args.input) if args.input else None
    spec = ExperimentSpec(
        datasets=datasets,
        snrs=tuple(float(s) for s in (args.snr or (30.0, 40.0, 50.0))),
        methods=methods,
        seeds=tuple(args.seed or (0, 1, 2)),
        grid=grid,
        out_dir=args.out,
        n_classes=args.classes,
        atoms_per_class=args.atoms,
        n_pixels=args.pixels,
        n_bands=args.bands,
        mesma_classes=args.mesma_classes,
        threads=_threads(args),
        bundles_path=str(_find(inp, "bundles")) if inp else None,
        pixels_path=str(_find(inp, "pixels")) if inp else None,
        truth_path=str(_find(inp, "truth")) if inp else None,
    )
    t = time.perf_counter()
    rows, _ = run_bench(spec, progress=print)
    print(f"{len(rows)} rows in {time.perf_counter() - t:.1f}s; tables written to {args.out}")
    return EXIT_OK


def cmd_maps(args) -> int:
    src = Path(args.abundances)
    if src.is_dir():
        src = _find(src, "abundances")
    names, a = fio.read_matrix(src, "abundances")
    paths = fio.write_maps(args.out, a, names, args.width, args.height)
    print(f"wrote {len(paths)} maps to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="memmunmix", description="Bundle-based hyperspectral unmixing with double sparsity.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sizes(sp, pixels=100, classes=10, atoms=30):
        sp.add_argument("--pixels", type=_positive_int, default=pixels)
        sp.add_argument("--classes", type=_positive_int, default=classes)
        sp.add_argument("--atoms", type=_positive_int, default=atoms, help="atoms per class")
        sp.add_argument("--bands", type=_positive_int, default=224)

    g = sub.add_parser("gen", help="generate a synthetic bundle library and pixel batch")
    g.add_argument("--sim", type=int, choices=(1, 2), required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--snr", type=float, default=None, help="SNR in dB (omit for noiseless)")
    sizes(g)
    g.add_argument("--out", required=True)
    g.add_argument("--gzip", action="store_true", help="write .csv.gz files")

    u = sub.add_parser("unmix", help="unmix a pixel file")
    u.add_argument("--method", choices=("memm", "memm_s") + BASELINE_METHODS, required=True)
    u.add_argument("--input", default=".", help="directory holding bundles.csv and pixels.csv")
    u.add_argument("--bundles", help="bundle file (overrides --input)")
    u.add_argument("--pixels", help="pixel file (overrides --input)")
    u.add_argument("--lambda-a", type=_nonneg, default=1e-2)
    u.add_argument("--lambda-b", type=_nonneg, default=1e-3)
    u.add_argument("--lambda-r", type=_nonneg, default=1e-3)
    u.add_argument("--lambda-g", type=_nonneg, default=1e-3)
    u.add_argument("--mesma-classes", type=_positive_int, default=2)
    u.add_argument("--threads", type=int, default=None)
    u.add_argument("--out", required=True)
    u.add_argument("--gzip", action="store_true")

    e = sub.add_parser("eval", help="score a solution against the truth")
    e.add_argument("--input", default=".", help="directory holding bundles.csv and truth.csv")
    e.add_argument("--bundles")
    e.add_argument("--truth")
    e.add_argument("--solution", help="directory holding abundances.csv (default: --input)")
    e.add_argument("--label", default="solution")
    e.add_argument("--out")

    b = sub.add_parser("bench", help="grid-search benchmark over methods, SNRs and seeds")
    b.add_argument("--sim", type=int, choices=(1, 2), nargs="+")
    b.add_argument("--snr", type=float, nargs="+")
    b.add_argument("--seed", type=int, nargs="+")
    b.add_argument("--method", choices=ALL_METHODS, nargs="+")
    b.add_argument("--grid", help="comma-separated parameter values")
    b.add_argument("--input", help="benchmark a file dataset (bundles, pixels, truth) instead")
    sizes(b, pixels=50, classes=6, atoms=10)
    b.add_argument("--mesma-classes", type=_positive_int, default=2)
    b.add_argument("--threads", type=int, default=None)
    b.add_argument("--out", required=True)

    m = sub.add_parser("maps", help="write one PGM abundance map per class")
    m.add_argument("--abundances", required=True, help="abundances.csv or its directory")
    m.add_argument("--width", type=_positive_int, required=True)
    m.add_argument("--height", type=_positive_int, required=True)
    m.add_argument("--out", required=True)
    return p


COMMANDS = {"gen": cmd_gen, "unmix": cmd_unmix, "eval": cmd_eval, "bench": cmd_bench, "maps": cmd_maps}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"memmunmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (fio.FormatError, DimensionError, SeedError, ValueError) as exc:
        print(f"memmunmix: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"memmunmix: cannot write output: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
