"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or
``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time

import numpy as np
import pytest

from memmunmix.baselines import fcls, mesma_batch, mesma_exhaustive
from memmunmix.bench import ExperimentSpec, run_bench
from memmunmix.cli import main as cli_main
from memmunmix.core import GroupingMap, SpectralBundles
from memmunmix.memm import MemmConfig, build_u_matrix, grad_a, grad_b, solve_batch, stack
from memmunmix.metrics import (
    SRE_CAP_DB,
    ZERO_THRESHOLD,
    set_distance,
    sparsity_level,
    sre_with_flag,
    support_distance,
    supports,
)
from memmunmix.prox import prox_nonneg_block_top1, prox_nonneg_l0, prox_simplex_l0, prox_sparse_group
from memmunmix.simgen import SimConfig, generate_bundles, simulate

import oracles


@pytest.fixture
def report(capsys):
    """``report(n, ok, detail)`` prints the verdict line and asserts."""
    def _report(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {n:2d} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return _report


# ---------------------------------------------------------------------------
# 1. prox operators against brute-force oracles
# ---------------------------------------------------------------------------

def test_c01_prox_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    gaps = {"simplex_l0": 0.0, "nonneg_l0": 0.0, "top1": 0.0, "sparse_group": 0.0}
    count = 0
    for _ in range(300):
        k = int(rng.integers(1, 7))
        x = rng.normal(0, 1.5, size=k)
        lam, step = float(rng.uniform(0, 1)), float(rng.uniform(0.2, 5))
        z = prox_simplex_l0(x, lam, step)
        ref = oracles.prox_simplex_l0_enum(x, lam, step)
        gaps["simplex_l0"] = max(gaps["simplex_l0"], oracles.simplex_l0_objective(z, x, lam, step) - ref)
        count += 1
    for _ in range(300):
        n = int(rng.integers(1, 13))
        x = rng.normal(0, 1.5, size=n)
        lam, step = float(rng.uniform(0, 1)), float(rng.uniform(0.2, 5))
        z = prox_nonneg_l0(x, lam, step)
        ref = oracles.prox_nonneg_l0_enum(x, lam, step)
        gaps["nonneg_l0"] = max(gaps["nonneg_l0"], oracles.nonneg_l0_objective(z, x, lam, step) - ref)
        count += 1
    for _ in range(250):
        g = GroupingMap(rng.integers(1, 4, size=int(rng.integers(1, 5))))
        x = rng.normal(0, 1.5, size=g.n_atoms)
        z = prox_nonneg_block_top1(x, g)
        gaps["top1"] = max(gaps["top1"], oracles.top1_objective(z, x, g) - oracles.top1_enum(x, g))
        count += 1
    for _ in range(250):
        g = GroupingMap(rng.integers(1, 4, size=int(rng.integers(1, 4))))
        x = rng.normal(0, 1.5, size=g.n_atoms)
        lg, l1, step = float(rng.uniform(0, 1)), float(rng.uniform(0, 1)), float(rng.uniform(0.2, 5))
        z = prox_sparse_group(x, g, lg, l1, step)
        ours = oracles.sparse_group_objective(z, x, g, lg, l1, step)
        ref = oracles.prox_sparse_group_numeric(x, g, lg, l1, step)
        gaps["sparse_group"] = max(gaps["sparse_group"], ours - ref)
        count += 1
    elapsed = time.perf_counter() - t0
    ok = (
        count >= 1000
        and max(gaps["simplex_l0"], gaps["nonneg_l0"], gaps["top1"]) <= 1e-10
        and gaps["sparse_group"] <= 1e-6
        and elapsed < 60
    )
    detail = f"{count} instances in {elapsed:.1f}s; worst gaps " + ", ".join(f"{k}={v:.2e}" for k, v in gaps.items())
    report(1, ok, detail)


# ---------------------------------------------------------------------------
# 2. PALM traces are non-increasing
# ---------------------------------------------------------------------------

def test_c02_palm_monotonicity(report):
    t0 = time.perf_counter()
    worst, violations, traces = -np.inf, 0, 0
    cfg = MemmConfig()
    for seed in range(5):
        for snr in (30.0, 40.0, 50.0):
            bundles, batch = simulate(SimConfig(seed=seed, n_pixels=50, snr_db=snr), 2)
            for s in solve_batch(bundles, batch, cfg):
                d = np.diff(s.objective_trace)
                if d.size:
                    worst = max(worst, float(d.max()))
                violations += int(np.sum(d > 1e-9))
                traces += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and traces == 750 and elapsed < 120
    report(2, ok, f"{traces} traces, {violations} steps increasing by > 1e-9 (largest step {worst:.2e}), {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. gradients against central differences
# ---------------------------------------------------------------------------

def _central(f, x, h=1e-5):
    out = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def test_c03_gradient_checks(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        sizes = rng.integers(1, 5, size=int(rng.integers(1, 5)))
        g = GroupingMap(sizes)
        atoms = rng.uniform(0.05, 1.0, size=(int(rng.integers(5, 30)), g.n_atoms))
        bundles = SpectralBundles(atoms, tuple(int(s) for s in sizes))
        y = rng.uniform(0, 1, size=atoms.shape[0])
        a = rng.dirichlet(np.ones(g.n_classes))
        b = rng.uniform(0, 2, size=g.n_atoms)
        u = build_u_matrix(bundles, a)
        fd_b = _central(lambda v: 0.5 * np.sum((u @ v - y) ** 2), b)
        m = np.column_stack([atoms[:, s] @ b[s] for s in g.slices])
        fd_a = _central(lambda v: 0.5 * np.sum((m @ v - y) ** 2), a)
        for got, ref in ((grad_b(u, b, y), fd_b), (grad_a(m, a, y), fd_a)):
            worst = max(worst, float(np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-12)))
    report(3, worst < 1e-6, f"100 instances, worst relative error {worst:.2e}")


# ---------------------------------------------------------------------------
# 4. separable recovery of single-atom pixels
# ---------------------------------------------------------------------------

def test_c04_separable_recovery(report):
    bundles = generate_bundles(SimConfig(seed=11, n_classes=5, atoms_per_class=5))
    g = bundles.grouping
    y = bundles.atoms.copy()  # every atom as a noiseless pixel
    true_sup = [frozenset({int(k)}) for k in g.class_of_atom]
    results = {}
    for name in ("memm", "memm_s"):
        _, a, r = stack(solve_batch(bundles, y, MemmConfig(variant=name)))
        results[name] = (a, r)
    r = fcls(bundles, y).r
    results["fcls"] = (g.aggregate(r), r)
    r = mesma_batch(bundles, y, max_classes=2).r
    results["mesma"] = (g.aggregate(r), r)
    parts, ok = [], True
    for name, (a, r) in results.items():
        dist = support_distance(true_sup, supports(a))
        resid = float(np.max(np.linalg.norm(bundles.atoms @ r - y, axis=0)))
        ok &= dist == 0.0 and resid < 1e-8
        parts.append(f"{name} DIST_a={dist:g} max resid={resid:.1e}")
    report(4, ok, f"{bundles.n_atoms} atoms; " + "; ".join(parts))


# ---------------------------------------------------------------------------
# 5-7. paper trends at desk scale
# ---------------------------------------------------------------------------

DESK = dict(n_classes=10, atoms_per_class=10, n_pixels=100, seeds=(0, 1, 2))


@pytest.fixture(scope="module")
def trend_rows():
    """Grid-searched FCLS and MEMM on both SIMs at every SNR, plus every
    method on SIM2 at 50 dB."""
    rows, _ = run_bench(ExperimentSpec(datasets=("sim1", "sim2"), methods=("fcls", "memm"), **DESK))
    others, _ = run_bench(ExperimentSpec(
        datasets=("sim2",), snrs=(50.0,), methods=("sunsal", "group", "elitist", "memm_s", "mesma"), **DESK
    ))
    return rows + others


def _row(rows, dataset, snr, method):
    return next(r for r in rows if r["dataset"] == dataset and r["snr_db"] == snr and r["method"] == method)


def test_c05_class_sparsity_trend(report, trend_rows):
    ok, parts = True, []
    for d in ("sim1", "sim2"):
        for snr in (30.0, 40.0, 50.0):
            m, f = _row(trend_rows, d, snr, "memm"), _row(trend_rows, d, snr, "fcls")
            em, ef = abs(m["sl_a"] - m["ref_sl_a"]), abs(f["sl_a"] - f["ref_sl_a"])
            ok &= em < ef
            parts.append(f"{d}@{snr:g} ref {m['ref_sl_a']:.2f} memm {m['sl_a']:.2f} fcls {f['sl_a']:.2f}")
    report(5, ok, "; ".join(parts))


def test_c06_support_recovery_trend(report, trend_rows):
    ok, parts = True, []
    for d in ("sim1", "sim2"):
        m, f = _row(trend_rows, d, 50.0, "memm"), _row(trend_rows, d, 50.0, "fcls")
        ok &= m["dist_a"] < 0.5 * f["dist_a"]
        parts.append(f"{d}@50 DIST_a memm {m['dist_a']:.4f} fcls {f['dist_a']:.4f}")
    report(6, ok, "; ".join(parts))


def test_c07_sre_trend(report, trend_rows):
    rows = [r for r in trend_rows if r["dataset"] == "sim2" and r["snr_db"] == 50.0]
    m, f = _row(rows, "sim2", 50.0, "memm"), _row(rows, "sim2", 50.0, "fcls")
    ok = m["sre_a_db"] >= f["sre_a_db"] - 0.5
    parts = [f"SRE_a memm {m['sre_a_db']:.2f} fcls {f['sre_a_db']:.2f}"]
    for r in sorted(rows, key=lambda r: r["method"]):
        gap = r["sre_a_db"] - r["sre_r_db"]
        ok &= r["sre_r_db"] < r["sre_a_db"] - 10
        parts.append(f"{r['method']} SRE_r {r['sre_r_db']:.2f} (gap {gap:.1f})")
    report(7, ok and len(rows) == 7, "; ".join(parts))


# ---------------------------------------------------------------------------
# 8. timing at N = 300
# ---------------------------------------------------------------------------

def test_c08_timing(report):
    bundles, batch = simulate(SimConfig(seed=0, n_classes=10, atoms_per_class=30, n_pixels=100, snr_db=40), 2)
    t = time.perf_counter()
    solve_batch(bundles, batch, MemmConfig(lambda_a=1e-2, lambda_b=1e-3))  # includes its FCLS start
    t_memm = time.perf_counter() - t
    t = time.perf_counter()
    for p in range(batch.n_pixels):
        mesma_exhaustive(bundles, batch.spectra[:, p], max_classes=2)
    t_mesma = time.perf_counter() - t
    ok = t_memm < 60 and t_mesma > t_memm
    report(8, ok, f"N={bundles.n_atoms}, 100 pixels: MEMM {t_memm:.2f}s, MESMA (<=2 classes) {t_mesma:.2f}s")


# ---------------------------------------------------------------------------
# 9. a bench cell is byte-for-byte reproducible
# ---------------------------------------------------------------------------

def test_c09_bench_determinism(report, tmp_path):
    args = ["bench", "--sim", "2", "--snr", "50", "--method", "memm"]
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert cli_main([*args, "--out", str(out)]) == 0
        outs.append((out / "tables.csv").read_bytes())
    ok = outs[0] == outs[1] and len(outs[0].splitlines()) == 3
    report(9, ok, f"tables.csv {len(outs[0])} bytes, identical={outs[0] == outs[1]}")


# ---------------------------------------------------------------------------
# 10. metric identities
# ---------------------------------------------------------------------------

def test_c10_metric_identities(report):
    a = np.array([[0.3, 1.0], [0.7, 0.0]])
    checks = {
        "sre perfect -> capped": sre_with_flag(a, a) == (SRE_CAP_DB, True),
        "sre zero estimate -> 0 dB": sre_with_flag(a, np.zeros_like(a))[0] == 0.0,
        "sre hand value 16.99 dB": round(sre_with_flag([1.0, 0.0], [0.9, 0.1])[0], 2) == 16.99
        and math.isclose(sre_with_flag([1.0, 0.0], [0.9, 0.1])[0], 10 * math.log10(50), rel_tol=1e-14),
        "sl all zero -> 0": sparsity_level(np.zeros((3, 2))) == 0.0,
        "sl vertices -> 1": sparsity_level(np.eye(4)) == 1.0,
        "sl counts 1e-4": sparsity_level([ZERO_THRESHOLD, 0.0]) == 1.0,
        "dist equal -> 0": set_distance(frozenset({1, 2}), frozenset({1, 2})) == 0.0,
        "dist disjoint -> 1": set_distance(frozenset({0, 1}), frozenset({2, 3})) == 1.0,
        "dist {1,2} vs {1,2,3} -> 1/3": set_distance(frozenset({1, 2}), frozenset({1, 2, 3})) == 1 / 3,
        "dist empty vs empty -> 0": set_distance(frozenset(), frozenset()) == 0.0,
    }
    failed = [k for k, v in checks.items() if not v]
    report(10, not failed, f"{len(checks) - len(failed)}/{len(checks)} identities hold" + (f"; failed: {failed}" if failed else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
