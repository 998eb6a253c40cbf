"""Comparison unmixing solvers working on the full bundle dictionary.

FCLS is solved exactly as a nonnegative least squares problem with the
sum-to-one row appended. SUnSAL and the elitist lasso share one batched ADMM
core, the sparse group lasso uses accelerated proximal gradient and
``mesma_exhaustive`` enumerates one-atom-per-class models.

Every solver takes spectra as an (L,) vector or an (L, P) matrix and returns
a :class:`BaselineResult` whose arrays have one pixel per column.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import nnls

from .core import DimensionError, GroupingMap, SpectralBundles
from .prox import project_simplex, prox_sparse_group

log = logging.getLogger(__name__)

METHODS = ("fcls", "sunsal", "group", "elitist", "mesma")


class BudgetExceededError(RuntimeError):
    """Exhaustive search would test more combinations than allowed."""


@dataclass(frozen=True)
class BaselineConfig:
    method: str = "fcls"
    lambda_r: float = 1e-3
    lambda_g: float = 1e-3
    p: int = 1
    q: int = 2
    admm_rho: float = 1.0
    max_iters: int = 5000
    tol: float = 1e-6
    max_classes: int = 2
    budget: int = 2_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown baseline {self.method!r}; choose from {METHODS}")
        if self.lambda_r < 0 or self.lambda_g < 0:
            raise ValueError("regularization weights must be nonnegative")
        if not self.admm_rho > 0:
            raise ValueError("admm_rho must be positive")
        if self.max_iters < 1 or not self.tol > 0:
            raise ValueError("max_iters must be >= 1 and tol > 0")


@dataclass
class BaselineResult:
    """Per-atom abundances ``r`` (N, P) after the method's normalization.

    ``raw`` is the solver output before normalization, ``degenerate`` flags
    pixels whose raw solution summed to zero, ``class_support`` is filled by
    the exhaustive search.
    """

    r: np.ndarray
    raw: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    degenerate: np.ndarray
    class_support: Optional[list] = None
    residuals: dict = field(default_factory=dict)


def _dictionary(bundles_or_matrix):
    if isinstance(bundles_or_matrix, SpectralBundles):
        return bundles_or_matrix.atoms, bundles_or_matrix.gram
    e = np.asarray(bundles_or_matrix, dtype=float)
    if e.ndim != 2 or e.shape[1] == 0:
        raise DimensionError(f"dictionary must be (L, N) with N >= 1, got {e.shape}")
    return e, e.T @ e


def _spectra(y, n_bands: int):
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    if single:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] != n_bands:
        raise DimensionError(f"spectra must have {n_bands} bands, got shape {y.shape}")
    return y, single


def _squeeze(res: BaselineResult, single: bool) -> BaselineResult:
    if not single:
        return res
    return BaselineResult(
        res.r[:, 0], res.raw[:, 0], res.converged[0], res.iterations[0], res.degenerate[0],
        res.class_support[0] if res.class_support is not None else None,
        {k: v[0] for k, v in res.residuals.items()},
    )


def _normalize_columns(raw: np.ndarray):
    s = raw.sum(axis=0)
    degenerate = ~(s > 0)
    r = np.where(degenerate, 0.0, raw / np.where(degenerate, 1.0, s))
    return r, degenerate


# ---------------------------------------------------------------------------
# ADMM core
# ---------------------------------------------------------------------------

def admm(
    gram: np.ndarray,
    q: np.ndarray,
    proxes: Sequence[Callable[[np.ndarray, np.ndarray], np.ndarray]],
    rho: float = 1.0,
    max_iters: int = 5000,
    tol: float = 1e-6,
):
    """Consensus ADMM for ``min 1/2 r'Gr - q'r + sum_i g_i(z_i)`` s.t. ``r = z_i``.

    ``proxes[i](v, cols)`` evaluates the prox of ``g_i / rho`` on the columns
    ``cols`` of the batch. Pixels stop individually once the primal and dual
    residuals are both below ``tol``. Returns the last split variable (which
    the callers use for their feasible set), iteration counts, convergence
    flags and final residuals.
    """
    n, npix = q.shape
    m = len(proxes)
    factor = cho_factor(gram + m * rho * np.eye(n))
    all_cols = np.arange(npix)
    r = cho_solve(factor, q)
    z = [prox(r, all_cols) for prox in proxes]
    u = [np.zeros_like(r) for _ in proxes]
    iters = np.zeros(npix, dtype=int)
    converged = np.zeros(npix, dtype=bool)
    pri = np.full(npix, np.inf)
    dual = np.full(npix, np.inf)
    active = all_cols.copy()
    for it in range(1, max_iters + 1):
        if active.size == 0:
            break
        zs = [zi[:, active] for zi in z]
        us = [ui[:, active] for ui in u]
        rhs = q[:, active] + rho * sum(zi - ui for zi, ui in zip(zs, us))
        ra = cho_solve(factor, rhs)
        znew = [prox(ra + ui, active) for prox, ui in zip(proxes, us)]
        p_res = np.zeros(active.size)
        d_vec = np.zeros_like(ra)
        for i in range(m):
            diff = ra - znew[i]
            u[i][:, active] = us[i] + diff
            p_res = np.maximum(p_res, np.linalg.norm(diff, axis=0))
            d_vec += znew[i] - zs[i]
            z[i][:, active] = znew[i]
        d_res = rho * np.linalg.norm(d_vec, axis=0)
        r[:, active] = ra
        pri[active], dual[active] = p_res, d_res
        iters[active] = it
        done = (p_res < tol) & (d_res < tol)
        converged[active[done]] = True
        active = active[~done]
    return z[-1], iters, converged, pri, dual


def _polish(gram, q, x, lam: float, sum_to_one: bool, max_rounds: int = 20):
    """Active-set refinement of an approximate solution, warm-started on its support.

    Alternates exact solves on the current support with dropping nonpositive
    entries and adding the worst KKT violator. The refined point replaces
    ``x`` only if its KKT residual is smaller.
    """
    best = x
    best_kkt = kkt_residual(gram, q, x, lam, sum_to_one)
    support = np.flatnonzero(x > 0)
    for _ in range(max_rounds):
        if support.size == 0 or best_kkt <= 1e-13:
            break
        g_ss = gram[np.ix_(support, support)]
        if sum_to_one:
            k = support.size
            mat = np.zeros((k + 1, k + 1))
            mat[:k, :k] = g_ss
            mat[:k, k] = 1.0
            mat[k, :k] = 1.0
            sol = np.linalg.lstsq(mat, np.append(q[support], 1.0), rcond=None)[0][:k]
        else:
            sol = np.linalg.lstsq(g_ss, q[support] - lam, rcond=None)[0]
        if np.any(sol <= 0):
            support = support[sol > 0]
            continue
        cand = np.zeros_like(x)
        cand[support] = sol
        kkt = kkt_residual(gram, q, cand, lam, sum_to_one)
        if kkt < best_kkt:
            best, best_kkt = cand, kkt
        grad = gram @ cand - q + lam
        mu = grad[support].mean() if sum_to_one else 0.0
        viol = np.where(cand > 0, -np.inf, mu - grad)
        j = int(np.argmax(viol))
        if viol[j] <= 0:
            break
        support = np.sort(np.append(support, j))
    return best


def kkt_residual(gram, q, r, lam: float = 0.0, sum_to_one: bool = True) -> float:
    """Worst KKT violation of ``1/2 r'Gr - q'r + lam*sum(r)`` over r >= 0 (and sum r = 1)."""
    r = np.asarray(r, dtype=float)
    grad = gram @ r - q + lam
    on = r > 0
    if sum_to_one:
        mu = grad[on].mean() if on.any() else grad.min()
        feas = abs(r.sum() - 1.0)
    else:
        mu = 0.0
        feas = 0.0
    stat = np.abs(grad[on] - mu).max() if on.any() else 0.0
    dual = np.maximum(mu - grad[~on], 0.0).max() if (~on).any() else 0.0
    return float(max(stat, dual, feas, max(0.0, -r.min())))


def _simplex_prox(v, cols):
    return project_simplex(v)


def _lawson_hanson(c: np.ndarray, d: np.ndarray, maxiter: int):
    """Active-set NNLS ``min ||c w - d||`` s.t. ``w >= 0``.

    Same iteration as scipy's ``nnls`` but each passive-set subproblem is a
    small dense least squares on the selected columns only, which is much
    cheaper when the solution is sparse. Returns ``(w, converged)``.
    """
    m, n = c.shape
    tol = 10 * max(m, n) * np.finfo(float).eps * np.abs(c).sum(axis=0).max()
    w = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    resid = d.copy()
    it = 0
    while True:
        grad = c.T @ resid
        grad[passive] = -np.inf
        j = int(np.argmax(grad))
        if grad[j] <= tol:
            return w, True
        passive[j] = True
        while True:
            it += 1
            if it > maxiter:
                return w, False
            idx = np.flatnonzero(passive)
            s = np.linalg.lstsq(c[:, idx], d, rcond=None)[0]
            if np.all(s > 0):
                w[:] = 0.0
                w[idx] = s
                break
            # step back to the boundary and drop the entries that hit zero
            neg = s <= 0
            wi = w[idx]
            alpha = np.min(wi[neg] / (wi[neg] - s[neg]))
            w[idx] = wi + alpha * (s - wi)
            drop = idx[w[idx] <= tol]
            passive[drop] = False
            w[drop] = 0.0
        resid = d - c @ w


def fcls_pixel(e: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Exact FCLS for one pixel through nonnegative least squares.

    With ``C = E - y 1'``, any ``w >= 0`` minimizing
    ``||C w||^2 + (1'w - 1)^2`` is a positive multiple of the simplex point
    closest to the origin in the hull of C's columns, i.e. the FCLS solution.
    """
    c = np.vstack([e - y[:, None], np.ones((1, e.shape[1]))])
    rhs = np.zeros(c.shape[0])
    rhs[-1] = 1.0
    w, ok = _lawson_hanson(c, rhs, 50 * e.shape[1])
    if not ok or w.sum() <= 0:
        w = nnls(c, rhs, maxiter=50 * e.shape[1])[0]
    return w / w.sum()


def fcls(bundles_or_matrix, y, cfg: BaselineConfig = BaselineConfig()) -> BaselineResult:
    """Fully constrained least squares ``min 1/2||Er - y||^2`` s.t. r on the simplex."""
    e, gram = _dictionary(bundles_or_matrix)
    y, single = _spectra(y, e.shape[0])
    q = e.T @ y
    npix = y.shape[1]
    r = np.column_stack([fcls_pixel(e, y[:, p]) for p in range(npix)]) if npix else np.zeros((e.shape[1], 0))
    kkt = np.array([kkt_residual(gram, q[:, p], r[:, p]) for p in range(npix)])
    conv = kkt <= 1e-6 * max(1.0, float(np.abs(gram).max()))
    if not conv.all():
        log.warning("fcls: %d pixel(s) with KKT residual above tolerance", int((~conv).sum()))
    res = BaselineResult(r, r.copy(), conv, np.ones(npix, int), np.zeros(npix, bool), residuals={"kkt": kkt})
    return _squeeze(res, single)


def sunsal(bundles_or_matrix, y, lambda_r: float, cfg: BaselineConfig = BaselineConfig()) -> BaselineResult:
    """Nonnegative lasso ``1/2||Er - y||^2 + lambda_r ||r||_1``, then r / sum(r).

    Pixels whose solution is identically zero are returned as zeros with
    ``degenerate`` set.
    """
    if lambda_r < 0:
        raise ValueError("lambda_r must be nonnegative")
    e, gram = _dictionary(bundles_or_matrix)
    y, single = _spectra(y, e.shape[0])
    q = e.T @ y
    rho = cfg.admm_rho
    z, iters, conv, pri, dual = admm(
        gram, q, [lambda v, cols: np.maximum(v - lambda_r / rho, 0.0)], rho, cfg.max_iters, cfg.tol
    )
    kkt = np.empty(z.shape[1])
    for p in range(z.shape[1]):
        z[:, p] = _polish(gram, q[:, p], z[:, p], lambda_r, False)
        kkt[p] = kkt_residual(gram, q[:, p], z[:, p], lambda_r, False)
    # a KKT-certified polish counts as converged even if ADMM ran out of iterations
    conv = conv | (kkt <= 1e-6 * max(1.0, float(np.abs(gram).max())))
    r, degenerate = _normalize_columns(z)
    res = BaselineResult(r, z, conv, iters, degenerate, residuals={"primal": pri, "dual": dual, "kkt": kkt})
    return _squeeze(res, single)


# ---------------------------------------------------------------------------
# Social sparsity
# ---------------------------------------------------------------------------

def prox_elitist(x, g: GroupingMap, lam) -> np.ndarray:
    """Prox of ``lam * sqrt(sum_k ||x_k||_1^2)`` on the nonnegative orthant.

    Moreau decomposition: subtract the projection onto the dual-norm ball
    ``sqrt(sum_k ||x_k||_inf^2) <= lam``. That projection clips block k at a
    level t_k solving ``sum_j (x_kj - t_k)_+ = mu t_k``, with mu chosen so
    that ``sum t_k^2 = lam^2``. ``lam`` may vary per column.
    """
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    single = x.ndim == 1
    if single:
        x = x[:, None]
    npix = x.shape[1]
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (npix,))
    kmax = int(g.sizes.max())
    # sorted block values, zero-padded: (K, kmax, P)
    srt = np.zeros((g.n_classes, kmax, npix))
    for k, s in enumerate(g.slices):
        srt[k, : g.sizes[k]] = -np.sort(-x[s], axis=0)
    csum = np.cumsum(srt, axis=1)
    m = np.arange(1, kmax + 1, dtype=float)[None, :, None]

    def levels(mu, cols):
        ratio = csum[:, :, cols] / (m + mu[None, None, :])
        t = ratio.max(axis=1)
        return t, t / (ratio.argmax(axis=1) + 1.0 + mu[None, :])

    t0 = srt[:, 0, :]
    inside = np.sum(t0 ** 2, axis=0) <= lam ** 2
    # phi(mu) = 1/||t(mu)|| - 1/lam is concave and increasing (a -2 power
    # mean of the concave 1/t_k), so Newton from mu = 0 rises monotonically
    # to the root; it is exact once the active prefix of each block settles
    live = ~inside & (lam > 0)
    mu = np.zeros(npix)
    for _ in range(100):
        if not live.any():
            break
        idx = np.flatnonzero(live)
        t, slope = levels(mu[idx], idx)
        norm = np.sqrt(np.sum(t * t, axis=0))
        phi = 1.0 / norm - 1.0 / lam[idx]
        dphi = np.sum(t * slope, axis=0) / norm ** 3
        step = np.where((phi < 0) & (dphi > 0), -phi / np.where(dphi > 0, dphi, 1.0), 0.0)
        mu[idx] += step
        live[idx[step <= 1e-15 * (1.0 + mu[idx])]] = False
    t = levels(mu, slice(None))[0]
    out = np.maximum(x - g.expand(t), 0.0)
    out[:, lam <= 0] = np.maximum(x[:, lam <= 0], 0.0)
    out[:, inside] = 0.0
    return out[:, 0] if single else out


def elitist_lasso_unmix(
    bundles: SpectralBundles, y, lambda_r: float, p: int = 1, q: int = 2, cfg: BaselineConfig = BaselineConfig()
) -> BaselineResult:
    """Social-sparsity unmixing on the simplex, ``lambda_r (sum_k ||r_k||_p^q)^(1/q)``.

    ``(p, q) = (1, 2)`` is the elitist lasso, ``(2, 1)`` the group lasso.
    Solved by ADMM with one split for the penalty and one for the simplex.
    """
    if (p, q) not in ((1, 2), (2, 1)):
        raise ValueError(f"unsupported (p, q) = {(p, q)}; use (1, 2) or (2, 1)")
    if lambda_r < 0:
        raise ValueError("lambda_r must be nonnegative")
    g = bundles.grouping
    y, single = _spectra(y, bundles.n_bands)
    qv = bundles.atoms.T @ y
    rho = cfg.admm_rho
    if (p, q) == (1, 2):
        penalty = lambda v, cols: prox_elitist(v, g, lambda_r / rho)
    else:
        penalty = lambda v, cols: prox_sparse_group(v, g, lambda_r / rho, 0.0)
    z, iters, conv, pri, dual = admm(bundles.gram, qv, [penalty, _simplex_prox], rho, cfg.max_iters, cfg.tol)
    res = BaselineResult(z, z.copy(), conv, iters, np.zeros(z.shape[1], bool), residuals={"primal": pri, "dual": dual})
    return _squeeze(res, single)


# ---------------------------------------------------------------------------
# Sparse group lasso
# ---------------------------------------------------------------------------

def sparse_group_objective(bundles: SpectralBundles, y, r, lambda_g: float, lambda_r: float) -> np.ndarray:
    g = bundles.grouping
    r = np.asarray(r, dtype=float)
    resid = bundles.atoms @ r - np.asarray(y, dtype=float)
    norms = np.sqrt(np.add.reduceat(r * r, g.starts, axis=0))
    return 0.5 * np.sum(resid * resid, axis=0) + lambda_g * norms.sum(axis=0) + lambda_r * np.abs(r).sum(axis=0)


def group_lasso_unmix(
    bundles: SpectralBundles,
    y,
    lambda_g: float,
    lambda_r: float,
    cfg: BaselineConfig = BaselineConfig(),
    inflation: float = 1.1,
) -> BaselineResult:
    """Nonnegative sparse group lasso by FISTA with restart on objective increase.

    The step is ``1/(inflation*||E'E||_F)``. The result is normalized to sum
    to one like SUnSAL; ``raw`` keeps the penalized solution.
    """
    if lambda_g < 0 or lambda_r < 0:
        raise ValueError("regularization weights must be nonnegative")
    g = bundles.grouping
    y, single = _spectra(y, bundles.n_bands)
    gram = bundles.gram
    qv = bundles.atoms.T @ y
    lip = inflation * np.linalg.norm(gram)

    def objective(r, cols):
        fit = 0.5 * np.sum(r * (gram @ r), axis=0) - np.sum(qv[:, cols] * r, axis=0)
        norms = np.sqrt(np.add.reduceat(r * r, g.starts, axis=0))
        return fit + lambda_g * norms.sum(axis=0) + lambda_r * r.sum(axis=0)

    def step(v, cols):
        return prox_sparse_group(v - (gram @ v - qv[:, cols]) / lip, g, lambda_g, lambda_r, lip)

    npix = y.shape[1]
    all_cols = np.arange(npix)
    x = np.maximum(np.linalg.lstsq(bundles.atoms, y, rcond=None)[0], 0.0)
    f = objective(x, all_cols)
    z = x.copy()
    t = np.ones(npix)
    iters = np.zeros(npix, dtype=int)
    conv = np.zeros(npix, dtype=bool)
    active = all_cols.copy()
    for it in range(1, cfg.max_iters + 1):
        if active.size == 0:
            break
        xa, za, ta = x[:, active], z[:, active], t[active]
        xn = step(za, active)
        fn = objective(xn, active)
        worse = fn > f[active]
        if worse.any():
            xn[:, worse] = step(xa[:, worse], active[worse])
            fn[worse] = objective(xn[:, worse], active[worse])
            ta = np.where(worse, 1.0, ta)
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * ta * ta))
        z[:, active] = xn + ((ta - 1.0) / tn) * (xn - xa)
        done = np.abs(f[active] - fn) <= cfg.tol * 1e-3 * np.maximum(np.abs(fn), 1.0)
        done &= np.linalg.norm(xn - xa, axis=0) <= cfg.tol
        x[:, active], f[active], t[active] = xn, fn, tn
        iters[active] = it
        conv[active[done]] = True
        active = active[~done]
    r, degenerate = _normalize_columns(x)
    res = BaselineResult(r, x, conv, iters, degenerate)
    return _squeeze(res, single)


# ---------------------------------------------------------------------------
# Exhaustive MESMA
# ---------------------------------------------------------------------------

def mesma_count(sizes: Sequence[int], max_classes: int) -> int:
    """Number of one-atom-per-class models with 1..max_classes classes."""
    # elementary symmetric polynomials of the block sizes
    e = [1] + [0] * max_classes
    for n in sizes:
        for j in range(max_classes, 0, -1):
            e[j] += e[j - 1] * int(n)
    return sum(e[1:])


def mesma_exhaustive(
    bundles: SpectralBundles, y, max_classes: int = 2, budget: int = 2_000_000
) -> tuple[np.ndarray, frozenset]:
    """Best one-atom-per-class model for a single pixel.

    Every subset of at most ``max_classes`` classes and every choice of one
    atom per selected class is unmixed under the sum-to-one constraint; models
    with a negative fraction are rejected (their nonnegative solution lives on
    a smaller model, which is enumerated too). Returns the per-atom abundance
    vector and the selected classes. Among equal errors the model with fewer
    classes wins.
    """
    g = bundles.grouping
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != bundles.n_bands:
        raise DimensionError(f"expected a single spectrum of {bundles.n_bands} bands")
    max_classes = min(int(max_classes), g.n_classes)
    if max_classes < 1:
        raise ValueError("max_classes must be >= 1")
    count = mesma_count(g.sizes, max_classes)
    if count > budget:
        raise BudgetExceededError(
            f"exhaustive search needs {count} models (> budget {budget}); "
            "reduce max_classes, the number of classes or the atoms per class"
        )
    gram = bundles.gram
    q = bundles.atoms.T @ y
    yy = float(y @ y)
    slack = 1e-12 * max(yy, 1e-300)
    best_err, best_idx, best_coef = np.inf, None, None
    for m in range(1, max_classes + 1):
        for classes in itertools.combinations(range(g.n_classes), m):
            grids = np.meshgrid(*[np.arange(g.starts[k], g.stops[k]) for k in classes], indexing="ij")
            idx = np.stack([a.ravel() for a in grids], axis=1)
            if m == 1:
                coef = np.ones((idx.shape[0], 1))
            else:
                coef = _sum_to_one_ls(gram[idx[:, :, None], idx[:, None, :]], q[idx])
            gsub = gram[idx[:, :, None], idx[:, None, :]]
            err = np.einsum("ci,cij,cj->c", coef, gsub, coef) - 2.0 * np.sum(coef * q[idx], axis=1) + yy
            err = np.where(np.all(coef >= 0, axis=1), err, np.inf)
            c = int(np.argmin(err))
            if err[c] < best_err - slack:
                best_err, best_idx, best_coef = err[c], idx[c], coef[c]
    r = np.zeros(bundles.n_atoms)
    r[best_idx] = best_coef
    support = frozenset(int(k) for k in np.unique(g.class_of_atom[best_idx[best_coef > 0]]))
    return r, support


def _sum_to_one_ls(gsub: np.ndarray, qsub: np.ndarray) -> np.ndarray:
    n, m, _ = gsub.shape
    mat = np.zeros((n, m + 1, m + 1))
    mat[:, :m, :m] = gsub
    mat[:, :m, m] = 1.0
    mat[:, m, :m] = 1.0
    rhs = np.concatenate([qsub, np.ones((n, 1))], axis=1)
    try:
        sol = np.linalg.solve(mat, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        sol = np.stack([np.linalg.lstsq(a, b, rcond=None)[0] for a, b in zip(mat, rhs)])
    return sol[:, :m]


def mesma_batch(bundles: SpectralBundles, y, max_classes: int = 2, budget: int = 2_000_000) -> BaselineResult:
    y, single = _spectra(y, bundles.n_bands)
    cols, supports = [], []
    for p in range(y.shape[1]):
        r, s = mesma_exhaustive(bundles, y[:, p], max_classes, budget)
        cols.append(r)
        supports.append(s)
    r = np.column_stack(cols)
    npix = y.shape[1]
    res = BaselineResult(r, r.copy(), np.ones(npix, bool), np.ones(npix, int), np.zeros(npix, bool), supports)
    return _squeeze(res, single)


def run_baseline(bundles: SpectralBundles, y, cfg: BaselineConfig) -> BaselineResult:
    """Dispatch on ``cfg.method``."""
    if cfg.method == "fcls":
        return fcls(bundles, y, cfg)
    if cfg.method == "sunsal":
        return sunsal(bundles, y, cfg.lambda_r, cfg)
    if cfg.method == "group":
        return group_lasso_unmix(bundles, y, cfg.lambda_g, cfg.lambda_r, cfg)
    if cfg.method == "elitist":
        return elitist_lasso_unmix(bundles, y, cfg.lambda_r, cfg.p, cfg.q, cfg)
    return mesma_batch(bundles, y, cfg.max_classes, cfg.budget)
