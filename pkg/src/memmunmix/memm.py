"""Double-sparse unmixing with adaptive bundles (MEMM and MEMM_s).

Each pixel is modelled as ``y = E B a + n`` where ``B`` is block diagonal
with one nonnegative bundling vector per class and ``a`` lies on the simplex.
The objective

    J(b, a) = 1/2 ||E B a - y||^2 + lambda_b ||b||_0 + lambda_a ||a||_0

is minimized by proximal alternating linearized minimization: a gradient
step on ``b`` followed by its l0 prox, then the same on ``a`` with the
simplex + l0 prox. Step sizes inflate the Frobenius norm of the block Gram
matrices, which bounds the block Lipschitz constants, so J never increases.

MEMM_s replaces the l0 penalty on ``b`` by the constraint of at most one
nonzero bundling coefficient per class.

The solver runs a whole batch at once, one pixel per column; pixels stop
independently and never interact.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .baselines import fcls
from .core import DimensionError, GroupingMap, PixelBatch, SpectralBundles
from .prox import project_simplex, prox_nonneg_block_top1, prox_simplex_l0

log = logging.getLogger(__name__)

VARIANTS = ("memm", "memm_s")
DEGENERATE_ABUNDANCE = 1e-12
CHUNK = 256


class DivergenceError(RuntimeError):
    """The objective became non-finite."""


@dataclass(frozen=True)
class MemmConfig:
    lambda_a: float = 1e-3
    lambda_b: float = 1e-3
    gamma_m: float = 1.1
    gamma_a: float = 1.1
    max_iters: int = 500
    rel_tol: float = 1e-6
    variant: str = "memm"
    max_classes: Optional[int] = None
    max_atoms: Optional[int] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not (self.gamma_m > 1 and self.gamma_a > 1):
            raise ValueError("gamma_m and gamma_a must exceed 1")
        if not self.rel_tol > 0 or self.max_iters < 1:
            raise ValueError("rel_tol must be positive and max_iters >= 1")
        if self.lambda_a < 0 or self.lambda_b < 0:
            raise ValueError("lambda_a and lambda_b must be nonnegative")
        for cap in (self.max_classes, self.max_atoms):
            if cap is not None and cap < 1:
                raise ValueError("support caps must be >= 1")


@dataclass
class MemmSolution:
    b: np.ndarray
    a: np.ndarray
    r: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    error: Optional[str] = None


# ---------------------------------------------------------------------------
# Single-pixel building blocks
# ---------------------------------------------------------------------------

def build_u_matrix(bundles: SpectralBundles, a) -> np.ndarray:
    """``U = [E_1 a_1 | ... | E_K a_K]`` so that ``U b = E B a``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (bundles.n_classes,):
        raise DimensionError(f"abundance must have shape ({bundles.n_classes},), got {a.shape}")
    return bundles.atoms * bundles.grouping.expand(a)[None, :]


def grad_b(u, b, y) -> np.ndarray:
    """Gradient of ``1/2||U b - y||^2`` in b."""
    u = np.asarray(u, dtype=float)
    return u.T @ (u @ b - y)


def grad_a(m_tilde, a, y) -> np.ndarray:
    """Gradient of ``1/2||M a - y||^2`` in a, with ``M = E B``."""
    m_tilde = np.asarray(m_tilde, dtype=float)
    return m_tilde.T @ (m_tilde @ a - y)


def objective(bundles: SpectralBundles, y, b, a, cfg: MemmConfig) -> np.ndarray:
    """J(b, a) per pixel; the l0 term on b is dropped for MEMM_s."""
    g = bundles.grouping
    r = np.asarray(b) * g.expand(a)
    resid = bundles.atoms @ r - np.asarray(y, dtype=float)
    j = 0.5 * np.sum(resid * resid, axis=0) + cfg.lambda_a * np.count_nonzero(a, axis=0)
    if cfg.variant == "memm":
        j = j + cfg.lambda_b * np.count_nonzero(b, axis=0)
    return j


def initialize(bundles: SpectralBundles, y, r0: Optional[np.ndarray] = None):
    """Starting point from an FCLS solution.

    ``a0`` sums r0 within classes; each bundling block is r0's block divided
    by the class abundance, or uniform ``1/N_k`` when that abundance is below
    1e-12. ``a0`` is finally projected back onto the simplex. Accepts a single
    spectrum or a batch; ``r0`` may be passed to reuse an FCLS result.
    """
    g = bundles.grouping
    y = np.asarray(y, dtype=float)
    if r0 is None:
        r0 = fcls(bundles, y).r
    r0 = np.asarray(r0, dtype=float)
    a0 = g.aggregate(r0)
    abar = g.expand(a0)
    uniform = g.expand(1.0 / g.sizes.astype(float))
    if r0.ndim == 2:
        uniform = uniform[:, None]
    live = abar >= DEGENERATE_ABUNDANCE
    b0 = np.where(live, r0 / np.where(live, abar, 1.0), uniform)
    return b0, project_simplex(a0)


# ---------------------------------------------------------------------------
# Batched PALM engine
# ---------------------------------------------------------------------------

class _Workspace:
    """Quantities that depend only on the dictionary."""

    def __init__(self, bundles: SpectralBundles):
        g = bundles.grouping
        self.g = g
        self.e = bundles.atoms
        self.gram = bundles.gram
        sq = self.gram * self.gram
        # block sums of the squared Gram: ||U'U||_F^2 = (a^2)' S (a^2)
        self.block_sq = np.add.reduceat(np.add.reduceat(sq, g.starts, axis=0), g.starts, axis=1)
        self.slices = g.slices

    def reduced_gram(self, b: np.ndarray) -> np.ndarray:
        """``(E B)'(E B)`` for every column of b, shape (K, K, P)."""
        k = self.g.n_classes
        out = np.empty((k, k, b.shape[1]))
        for l, s in enumerate(self.slices):
            t = self.gram[:, s] @ b[s]
            out[:, l, :] = np.add.reduceat(b * t, self.g.starts, axis=0)
        return out


def _prox_bundling(v, lam, step, cfg: MemmConfig, g: GroupingMap):
    if cfg.variant == "memm_s":
        return prox_nonneg_block_top1(v, g)
    gain = 0.5 * step * v * v - lam
    keep = (v > 0) & (gain >= 0)
    if cfg.max_atoms is not None and cfg.max_atoms < v.shape[0]:
        # keep only the max_atoms largest gains
        ranked = np.where(keep, gain, -np.inf)
        order = np.argsort(-ranked, axis=0, kind="stable")
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(v.shape[0])[:, None], axis=0)
        keep &= rank < cfg.max_atoms
    return np.where(keep, v, 0.0)


def _palm(ws: _Workspace, y: np.ndarray, b: np.ndarray, a: np.ndarray, cfg: MemmConfig):
    """Run PALM on the columns of y from (b, a); returns per-pixel results."""
    g = ws.g
    npix = y.shape[1]
    b = b.copy()
    a = a.copy()
    q = ws.e.T @ y
    lam_b = cfg.lambda_b if cfg.variant == "memm" else 0.0

    def obj(bc, ac, cols):
        r = bc * ac[g.class_of_atom]
        resid = ws.e @ r - y[:, cols]
        val = 0.5 * np.sum(resid * resid, axis=0) + cfg.lambda_a * np.count_nonzero(ac, axis=0)
        return val + lam_b * np.count_nonzero(bc, axis=0)

    all_cols = np.arange(npix)
    j_cur = obj(b, a, all_cols)
    traces = [[float(v)] for v in j_cur]
    iters = np.zeros(npix, dtype=int)
    converged = np.zeros(npix, dtype=bool)
    errors: list[Optional[str]] = [None] * npix
    bad = ~np.isfinite(j_cur)
    for p in np.flatnonzero(bad):
        errors[p] = "non-finite objective at initialization"
    active = all_cols[~bad]

    for it in range(1, cfg.max_iters + 1):
        if active.size == 0:
            break
        ba, aa, qa = b[:, active], a[:, active], q[:, active]
        abar = aa[g.class_of_atom]

        # bundling step
        a2 = aa * aa
        c = cfg.gamma_m * np.sqrt(np.einsum("kp,kl,lp->p", a2, ws.block_sq, a2))
        grad = abar * (ws.gram @ (ba * abar) - qa)
        safe_c = np.where(c > 0, c, 1.0)
        v = ba - grad / safe_c
        b_new = _prox_bundling(v, lam_b, safe_c, cfg, g)
        # dormant classes see no gradient; their blocks are left as they are
        b_new = np.where((abar > 0) & (c > 0), b_new, ba)

        # abundance step
        mtm = ws.reduced_gram(b_new)
        mty = np.add.reduceat(b_new * qa, g.starts, axis=0)
        grad_a_ = np.einsum("klp,lp->kp", mtm, aa) - mty
        d = cfg.gamma_a * np.sqrt(np.sum(mtm * mtm, axis=(0, 1)))
        safe_d = np.where(d > 0, d, 1.0)
        a_new = prox_simplex_l0(aa - grad_a_ / safe_d, cfg.lambda_a, safe_d, cfg.max_classes)
        a_new = np.where(d > 0, a_new, aa)

        j_new = obj(b_new, a_new, active)
        b[:, active], a[:, active] = b_new, a_new
        iters[active] = it
        finite = np.isfinite(j_new)
        j_old = j_cur[active]
        j_cur[active] = j_new
        for p, val in zip(active, j_new):
            traces[p].append(float(val))
        for p in active[~finite]:
            errors[p] = f"objective became non-finite at iteration {it}"
        done = finite & (np.abs(j_new - j_old) < cfg.rel_tol * np.maximum(j_old, 1e-12))
        converged[active[done]] = True
        active = active[finite & ~done]

    return b, a, traces, iters, converged, errors


def _validate(bundles: SpectralBundles, y: np.ndarray) -> None:
    if not np.any(bundles.atoms):
        raise ValueError("the bundle dictionary is identically zero")
    if y.shape[0] != bundles.n_bands:
        raise DimensionError(f"spectra have {y.shape[0]} bands, bundles have {bundles.n_bands}")


def _solve_columns(bundles, ws, y, cfg, b0, a0) -> list[MemmSolution]:
    if cfg.variant == "memm_s":
        b0 = prox_nonneg_block_top1(b0, bundles.grouping)
    b, a, traces, iters, conv, errors = _palm(ws, y, b0, a0, cfg)
    g = bundles.grouping
    out = []
    for p in range(y.shape[1]):
        out.append(
            MemmSolution(
                b=b[:, p], a=a[:, p], r=b[:, p] * a[g.class_of_atom, p],
                objective_trace=np.asarray(traces[p]), iterations=int(iters[p]),
                converged=bool(conv[p]), error=errors[p],
            )
        )
    return out


def solve_pixel(
    bundles: SpectralBundles, y, cfg: MemmConfig = MemmConfig(), init: Optional[tuple] = None
) -> MemmSolution:
    """Unmix one spectrum. ``init=(b0, a0)`` overrides the FCLS start."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionError("solve_pixel takes a single spectrum; use solve_batch for matrices")
    _validate(bundles, y[:, None])
    b0, a0 = initialize(bundles, y) if init is None else init
    sol = _solve_columns(
        bundles, _Workspace(bundles), y[:, None], cfg,
        np.asarray(b0, float).reshape(-1, 1), np.asarray(a0, float).reshape(-1, 1),
    )[0]
    if sol.error is not None:
        raise DivergenceError(sol.error)
    return sol


def solve_batch(
    bundles: SpectralBundles,
    batch,
    cfg: MemmConfig = MemmConfig(),
    r0: Optional[np.ndarray] = None,
    threads: int = 1,
) -> list[MemmSolution]:
    """Unmix every pixel of ``batch`` (a PixelBatch or an (L, P) array).

    ``r0`` reuses a precomputed FCLS solution (N, P) for the initialization,
    which lets a parameter sweep pay for FCLS once. Pixels are processed in
    fixed-size chunks, optionally on several threads; the chunking does not
    depend on the thread count. A pixel whose objective diverges gets an
    ``error`` message and NaN estimates while the others proceed.
    """
    y = batch.spectra if isinstance(batch, PixelBatch) else np.asarray(batch, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    _validate(bundles, y)
    npix = y.shape[1]
    if npix == 0:
        return []
    ws = _Workspace(bundles)
    b0, a0 = initialize(bundles, y, r0)
    chunks = [np.arange(s, min(s + CHUNK, npix)) for s in range(0, npix, CHUNK)]

    def run(cols):
        return _solve_columns(bundles, ws, y[:, cols], cfg, b0[:, cols], a0[:, cols])

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    sols = [s for part in parts for s in part]
    for s in sols:
        if s.error is not None:
            log.warning("memm: %s", s.error)
            s.b = np.full_like(s.b, np.nan)
            s.a = np.full_like(s.a, np.nan)
            s.r = np.full_like(s.r, np.nan)
    return sols


def stack(solutions: Sequence[MemmSolution]):
    """Column-stack (b, a, r) of a list of solutions."""
    return (
        np.column_stack([s.b for s in solutions]),
        np.column_stack([s.a for s in solutions]),
        np.column_stack([s.r for s in solutions]),
    )
