"""Batch evaluation: reconstruction error, support size and support distance.

Estimates are compared with the truth column by column (one pixel per
column). Entries below ``ZERO_THRESHOLD`` count as zero; an entry equal to
the threshold counts as nonzero.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import GroupingMap

ZERO_THRESHOLD = 1e-4
SRE_CAP_DB = 300.0


def _as_columns(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def sre_with_flag(truth, est) -> tuple[float, bool]:
    """SRE in dB and whether it was capped.

    ``10*log10(sum ||t_i||^2 / sum ||t_i - e_i||^2)`` over all pixels. A zero
    error gives ``SRE_CAP_DB`` and ``capped=True``.
    """
    t = _as_columns(truth)
    e = _as_columns(est)
    if t.shape != e.shape:
        raise ValueError(f"truth {t.shape} and estimate {e.shape} differ in shape")
    if t.size == 0:
        raise ValueError("empty batch")
    signal = float(np.sum(t * t))
    err = float(np.sum((t - e) ** 2))
    if err == 0.0:
        return SRE_CAP_DB, True
    if signal == 0.0:
        return -SRE_CAP_DB, True
    val = 10.0 * math.log10(signal / err)
    if val > SRE_CAP_DB:
        return SRE_CAP_DB, True
    return val, False


def sre(truth, est) -> float:
    return sre_with_flag(truth, est)[0]


def supports(est, threshold: float = ZERO_THRESHOLD) -> list[frozenset]:
    """Index set of entries >= threshold, per column."""
    e = _as_columns(est)
    return [frozenset(np.flatnonzero(col >= threshold).tolist()) for col in e.T]


def sparsity_level(est, threshold: float = ZERO_THRESHOLD) -> float:
    """Mean number of entries >= threshold per pixel."""
    e = _as_columns(est)
    if e.shape[1] == 0:
        return 0.0
    return float(np.mean(np.sum(e >= threshold, axis=0)))


def set_distance(s: frozenset, s_hat: frozenset) -> float:
    m = max(len(s), len(s_hat))
    if m == 0:
        return 0.0
    return (m - len(s & s_hat)) / m


def support_distance(truth_supports: Sequence, est_supports: Sequence) -> float:
    """Mean normalized distance between paired support sets."""
    if len(truth_supports) != len(est_supports):
        raise ValueError("support lists have different lengths")
    if not truth_supports:
        return 0.0
    return float(np.mean([set_distance(frozenset(s), frozenset(t)) for s, t in zip(truth_supports, est_supports)]))


@dataclass
class EvalReport:
    sre_a_db: Optional[float]
    sre_r_db: Optional[float]
    sl_a: float
    sl_r: float
    dist_a: Optional[float]
    dist_r: Optional[float]
    wall_time_s: Optional[float] = None
    sre_a_capped: bool = False
    sre_r_capped: bool = False
    per_pixel: list = field(default_factory=list, repr=False)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("per_pixel")
        return d


def evaluate(truth, a_est, r_est, wall_time_s: Optional[float] = None) -> EvalReport:
    """All six metrics for one batch.

    ``truth`` is a :class:`~memmunmix.core.Truth` or None. Without truth only
    the support sizes are computed and the rest are None. Pixels whose
    estimate is NaN (failed solves) are excluded.
    """
    a_est = _as_columns(a_est)
    r_est = _as_columns(r_est)
    if a_est.shape[1] != r_est.shape[1]:
        raise ValueError("abundance and multiple abundance estimates disagree on the pixel count")
    ok = np.all(np.isfinite(a_est), axis=0) & np.all(np.isfinite(r_est), axis=0)
    a_ok, r_ok = a_est[:, ok], r_est[:, ok]
    sl_a, sl_r = sparsity_level(a_ok), sparsity_level(r_ok)
    sa_hat, sr_hat = supports(a_ok), supports(r_ok)
    if truth is None:
        per = [{"pixel": int(p), "sl_a": len(x), "sl_r": len(y)} for p, x, y in zip(np.flatnonzero(ok), sa_hat, sr_hat)]
        return EvalReport(None, None, sl_a, sl_r, None, None, wall_time_s, per_pixel=per)

    ta = _as_columns(truth.abundances)
    tr = _as_columns(truth.multiple)
    if ta.shape != a_est.shape or tr.shape != r_est.shape:
        raise ValueError(
            f"truth shapes {ta.shape}/{tr.shape} do not match estimates {a_est.shape}/{r_est.shape}"
        )
    ta, tr = ta[:, ok], tr[:, ok]
    sre_a, cap_a = sre_with_flag(ta, a_ok)
    sre_r, cap_r = sre_with_flag(tr, r_ok)
    sa, sr = supports(ta), supports(tr)
    per = []
    for i, p in enumerate(np.flatnonzero(ok)):
        per.append({
            "pixel": int(p),
            "sq_err_a": float(np.sum((ta[:, i] - a_ok[:, i]) ** 2)),
            "sq_err_r": float(np.sum((tr[:, i] - r_ok[:, i]) ** 2)),
            "sl_a": len(sa_hat[i]),
            "sl_r": len(sr_hat[i]),
            "dist_a": set_distance(sa[i], sa_hat[i]),
            "dist_r": set_distance(sr[i], sr_hat[i]),
        })
    return EvalReport(
        sre_a, sre_r, sl_a, sl_r,
        support_distance(sa, sa_hat), support_distance(sr, sr_hat),
        wall_time_s, cap_a, cap_r, per,
    )


def class_abundances(r_est, g: GroupingMap) -> np.ndarray:
    """Per-class abundances of an atom-level estimate (for baselines)."""
    return g.aggregate(_as_columns(r_est))
