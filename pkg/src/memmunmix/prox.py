"""Proximal operators and projections shared by the solvers.

All operators act along axis 0, so a single vector or a matrix holding one
vector per column can be passed.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .core import DimensionError, GroupingMap


def _as_finite(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[0] == 0:
        raise ValueError(f"expected a nonempty vector or matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    return x


def _check_params(lam, step) -> None:
    # scalars or per-column arrays
    if not np.all(np.asarray(step) > 0):
        raise ValueError(f"step must be positive, got {step}")
    if np.any(np.asarray(lam) < 0):
        raise ValueError(f"regularization weight must be nonnegative, got {lam}")


def prox_nonneg_l0(x, lam: float, step: float = 1.0) -> np.ndarray:
    """Prox of ``lam * ||z||_0`` restricted to ``z >= 0``.

    Solves ``min_z lam*||z||_0 + step/2*||z - x||^2`` over the nonnegative
    orthant: entries with ``step/2 * x_j**2 >= lam`` and ``x_j > 0`` survive
    unchanged, the rest are zeroed. Equality keeps the entry.
    """
    x = _as_finite(x)
    _check_params(lam, step)
    keep = (x > 0) & (0.5 * step * x * x >= lam)
    return np.where(keep, x, 0.0)


def prox_nonneg_block_top1(x, g: GroupingMap) -> np.ndarray:
    """Projection onto nonnegative vectors with at most one nonzero per class.

    The largest strictly positive entry of each block is kept; ties go to the
    lowest index.
    """
    x = _as_finite(x)
    if x.shape[0] != g.n_atoms:
        raise DimensionError(f"expected {g.n_atoms} rows, got {x.shape[0]}")
    out = np.zeros_like(x)
    for s in g.slices:
        block = x[s]
        j = np.argmax(block, axis=0)
        if x.ndim == 1:
            if block[j] > 0:
                out[s.start + j] = block[j]
        else:
            cols = np.arange(x.shape[1])
            vals = block[j, cols]
            pos = vals > 0
            out[s.start + j[pos], cols[pos]] = vals[pos]
    return out


def _sorted_simplex_thresholds(x: np.ndarray):
    """Sort x descending along axis 0 and return the simplex thresholds.

    ``t[j-1] = (sum of the j largest - 1) / j``; the Euclidean projection of
    the top-v entries onto the simplex subtracts ``t[min(v, rho)-1]``, where
    ``rho`` is the last j with ``u_j > t_j``.
    """
    order = np.argsort(-x, axis=0, kind="stable")
    u = np.take_along_axis(x, order, axis=0)
    k = x.shape[0]
    j = np.arange(1, k + 1, dtype=float).reshape((k,) + (1,) * (x.ndim - 1))
    t = (np.cumsum(u, axis=0) - 1.0) / j
    cond = u > t
    rho = k - np.argmax(cond[::-1], axis=0)
    return order, u, t, rho


def _scatter_sorted(order, u, theta, nnz) -> np.ndarray:
    k = u.shape[0]
    ranks = np.arange(k).reshape((k,) + (1,) * (u.ndim - 1))
    vals = np.where(ranks < nnz, u - theta, 0.0)
    vals = np.maximum(vals, 0.0)
    out = np.empty_like(u)
    np.put_along_axis(out, order, vals, axis=0)
    return out


def project_simplex(x) -> np.ndarray:
    """Euclidean projection onto ``{a >= 0, sum(a) = 1}`` by sort-and-threshold."""
    x = _as_finite(x)
    order, u, t, rho = _sorted_simplex_thresholds(x)
    theta = np.take_along_axis(t, np.expand_dims(rho - 1, 0), axis=0)
    return _scatter_sorted(order, u, theta, rho)


def prox_simplex_l0(x, lam: float, step: float = 1.0, max_support: Optional[int] = None) -> np.ndarray:
    """Prox of ``lam * ||a||_0`` plus the simplex indicator.

    Minimizes ``step/2*||a - x||^2 + lam*||a||_0`` over the unit simplex. For
    every support size v the best v-sparse simplex point projects the v
    largest entries of x, so scanning v = 1..K is exact. ``max_support`` caps
    v to impose a hard ``||a||_0 <= v`` constraint. Ties pick the smaller v.
    """
    x = _as_finite(x)
    _check_params(lam, step)
    k = x.shape[0]
    vmax = k if max_support is None else max(1, min(int(max_support), k))
    order, u, t, rho = _sorted_simplex_thresholds(x)

    # tail[m] = sum of squares of sorted entries beyond the m largest
    sq = u * u
    tail = np.concatenate([np.cumsum(sq[::-1], axis=0)[::-1], np.zeros_like(sq[:1])])
    best_score = None
    best_nnz = None
    for v in range(1, vmax + 1):
        nnz = np.minimum(v, rho)
        theta = np.take_along_axis(t, np.expand_dims(nnz - 1, 0), axis=0)[0]
        tail_v = np.take_along_axis(tail, np.expand_dims(nnz, 0), axis=0)[0]
        score = 0.5 * step * (nnz * theta * theta + tail_v) + lam * nnz
        if best_score is None:
            best_score, best_nnz = score, nnz
        else:
            better = score < best_score
            best_score = np.where(better, score, best_score)
            best_nnz = np.where(better, nnz, best_nnz)
    theta = np.take_along_axis(t, np.expand_dims(best_nnz - 1, 0), axis=0)
    return _scatter_sorted(order, u, theta, best_nnz)


def prox_sparse_group(x, g: GroupingMap, lambda_group: float, lambda_l1: float, step: float = 1.0) -> np.ndarray:
    """Prox of the nonnegative sparse group lasso penalty.

    ``lambda_group * sum_k ||x_k||_2 + lambda_l1 * ||x||_1`` on ``x >= 0``:
    clip and soft-threshold elementwise by ``lambda_l1/step``, then shrink
    each class block by ``max(0, 1 - (lambda_group/step)/||block||)``.
    """
    x = _as_finite(x)
    if lambda_group < 0 or lambda_l1 < 0:
        raise ValueError("sparse group weights must be nonnegative")
    _check_params(0.0, step)
    if x.shape[0] != g.n_atoms:
        raise DimensionError(f"expected {g.n_atoms} rows, got {x.shape[0]}")
    z = np.maximum(x - lambda_l1 / step, 0.0)
    if lambda_group == 0:
        return z
    norms = np.sqrt(np.add.reduceat(z * z, g.starts, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > 0, np.maximum(0.0, 1.0 - (lambda_group / step) / norms), 0.0)
    return z * g.expand(scale)
