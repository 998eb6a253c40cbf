"""Synthetic bundles and mixtures.

Base spectra are smooth sums of Gaussian bumps kept at least ``min_angle_deg``
apart. Each bundle perturbs its base spectrum by a lognormal global scale and
a smooth multiplicative random walk. SIM1 mixes one atom per active class;
SIM2 mixes a Dirichlet-weighted handful of atoms per active class.

Every generator is a deterministic function of the config and its seed. Each
stage draws from its own stream so that, e.g., changing the SNR leaves the
bundles and the clean mixtures untouched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .core import PixelBatch, SpectralBundles, Truth

# smallest truth value generated; matches the metrics' zero threshold
MIN_TRUTH_VALUE = 1e-4

_STREAM_BASE, _STREAM_BUNDLES, _STREAM_SIM1, _STREAM_SIM2, _STREAM_NOISE = range(5)


class SeedError(RuntimeError):
    """The rejection sampler could not satisfy the separation constraint."""


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_classes: int = 10
    atoms_per_class: int = 30
    n_pixels: int = 100
    n_bands: int = 224
    snr_db: Optional[float] = 50.0
    max_active_classes: int = 5
    max_active_atoms: int = 5
    dirichlet_alpha: float = 1.0
    min_angle_deg: float = 5.0
    scale_sigma: float = 0.2
    variability: float = 0.06

    def __post_init__(self):
        counts = (self.n_classes, self.atoms_per_class, self.n_pixels, self.n_bands,
                  self.max_active_classes, self.max_active_atoms)
        if min(counts) < 1:
            raise ValueError("all counts must be >= 1")
        if self.snr_db is not None and math.isnan(self.snr_db):
            raise ValueError("snr_db must be a number (use None or inf for noiseless data)")
        if not self.dirichlet_alpha > 0:
            raise ValueError("dirichlet_alpha must be positive")

    def rng(self, stream: int, *extra: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream, *extra])


def spectral_angle(x, y) -> float:
    """Angle in degrees between two spectra."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = float(x @ y) / (np.linalg.norm(x) * np.linalg.norm(y))
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def _bump_spectrum(rng: np.random.Generator, n_bands: int) -> np.ndarray:
    bands = np.arange(n_bands, dtype=float)
    out = np.zeros(n_bands)
    for _ in range(int(rng.integers(3, 7))):
        center = rng.uniform(0, n_bands)
        width = rng.uniform(n_bands / 30.0, n_bands / 6.0)
        out += rng.uniform(0.1, 0.9) * np.exp(-0.5 * ((bands - center) / width) ** 2)
    return out


def generate_base_spectra(cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """(L, K) matrix of base spectra, pairwise angles above ``cfg.min_angle_deg``."""
    rng = cfg.rng(_STREAM_BASE) if rng is None else rng
    accepted: list[np.ndarray] = []
    rejections = 0
    while len(accepted) < cfg.n_classes:
        cand = _bump_spectrum(rng, cfg.n_bands)
        if all(spectral_angle(cand, s) > cfg.min_angle_deg for s in accepted):
            accepted.append(cand)
            rejections = 0
            continue
        rejections += 1
        if rejections >= 1000:
            raise SeedError(
                f"1000 consecutive rejections placing spectrum {len(accepted) + 1} of {cfg.n_classes}; "
                "try another seed or fewer classes"
            )
    return np.column_stack(accepted)


def generate_bundle(
    base, n_atoms: int, rng: np.random.Generator, scale_sigma: float = 0.2, variability: float = 0.06
) -> np.ndarray:
    """(L, n_atoms) bundle around ``base``.

    Atom = base * s * m with s lognormal of mean one and log-sd ``scale_sigma``; m is one plus a
    mean-centred, smoothed Gaussian random walk over the bands (endpoint
    standard deviation about ``variability``), clipped to [0.7, 1.3].
    """
    base = np.asarray(base, dtype=float)
    n_bands = base.shape[0]
    out = np.empty((n_bands, n_atoms))
    for j in range(n_atoms):
        # log-mean shifted so the scale factor has mean one
        scale = rng.lognormal(-0.5 * scale_sigma**2, scale_sigma) if scale_sigma > 0 else 1.0
        if variability > 0:
            walk = np.cumsum(rng.normal(0.0, variability / math.sqrt(n_bands), n_bands))
            walk = gaussian_filter1d(walk, sigma=max(1.0, n_bands / 40.0), mode="nearest")
            mult = np.clip(1.0 + walk - walk.mean(), 0.7, 1.3)
        else:
            mult = 1.0
        out[:, j] = base * scale * mult
    return out


def generate_bundles(cfg: SimConfig) -> SpectralBundles:
    base = generate_base_spectra(cfg)
    rng = cfg.rng(_STREAM_BUNDLES)
    blocks = [
        generate_bundle(base[:, k], cfg.atoms_per_class, rng, cfg.scale_sigma, cfg.variability)
        for k in range(cfg.n_classes)
    ]
    return SpectralBundles(np.hstack(blocks), (cfg.atoms_per_class,) * cfg.n_classes)


def _dirichlet(rng: np.random.Generator, n: int, alpha: float, floor: float = 0.0) -> np.ndarray:
    # redraw until every share clears the floor
    if n == 1:
        return np.ones(1)
    while True:
        w = rng.dirichlet(np.full(n, alpha))
        if w.min() >= floor:
            return w


def _check_active(bundles: SpectralBundles, cfg: SimConfig) -> None:
    if cfg.max_active_classes > bundles.n_classes:
        raise ValueError(
            f"max_active_classes={cfg.max_active_classes} exceeds the {bundles.n_classes} available classes"
        )


def generate_sim1(bundles: SpectralBundles, cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> PixelBatch:
    """One randomly chosen atom per active class, Dirichlet abundances."""
    _check_active(bundles, cfg)
    rng = cfg.rng(_STREAM_SIM1) if rng is None else rng
    g = bundles.grouping
    a = np.zeros((g.n_classes, cfg.n_pixels))
    b = np.zeros((g.n_atoms, cfg.n_pixels))
    for p in range(cfg.n_pixels):
        m = int(rng.integers(1, cfg.max_active_classes + 1))
        classes = np.sort(rng.choice(g.n_classes, size=m, replace=False))
        atoms = [int(g.starts[k] + rng.integers(g.sizes[k])) for k in classes]
        a[classes, p] = _dirichlet(rng, m, cfg.dirichlet_alpha, MIN_TRUTH_VALUE)
        b[atoms, p] = 1.0
    r = b * g.expand(a)
    return PixelBatch(bundles.atoms @ r, Truth(a, r, b), None, {"sim": 1, "seed": cfg.seed})


def generate_sim2(bundles: SpectralBundles, cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> PixelBatch:
    """Dirichlet bundling over 1..max_active_atoms atoms per active class."""
    _check_active(bundles, cfg)
    rng = cfg.rng(_STREAM_SIM2) if rng is None else rng
    g = bundles.grouping
    a = np.zeros((g.n_classes, cfg.n_pixels))
    b = np.zeros((g.n_atoms, cfg.n_pixels))
    for p in range(cfg.n_pixels):
        m = int(rng.integers(1, cfg.max_active_classes + 1))
        classes = np.sort(rng.choice(g.n_classes, size=m, replace=False))
        a[classes, p] = _dirichlet(rng, m, cfg.dirichlet_alpha, MIN_TRUTH_VALUE)
        for k in classes:
            n_at = int(rng.integers(1, min(cfg.max_active_atoms, int(g.sizes[k])) + 1))
            # a class near the truth floor cannot split into many atoms that each clear it
            n_at = max(1, min(n_at, int(a[k, p] / (2.0 * MIN_TRUTH_VALUE))))
            atoms = np.sort(rng.choice(int(g.sizes[k]), size=n_at, replace=False)) + g.starts[k]
            b[atoms, p] = _dirichlet(rng, n_at, cfg.dirichlet_alpha, MIN_TRUTH_VALUE / a[k, p])
    r = b * g.expand(a)
    return PixelBatch(bundles.atoms @ r, Truth(a, r, b), None, {"sim": 2, "seed": cfg.seed})


def add_noise(batch: PixelBatch, snr_db: Optional[float], rng: np.random.Generator) -> PixelBatch:
    """White Gaussian noise at ``snr_db`` relative to the batch's mean signal power.

    ``None`` or ``inf`` returns the batch unchanged.
    """
    if snr_db is None or math.isinf(snr_db):
        return batch
    y = batch.spectra
    sigma = math.sqrt(float(np.mean(y * y)) / 10.0 ** (snr_db / 10.0))
    noisy = y + rng.normal(0.0, sigma, size=y.shape)
    return PixelBatch(noisy, batch.truth, float(snr_db), dict(batch.meta))


def realized_snr(clean, noisy) -> float:
    clean = np.asarray(clean, dtype=float)
    noise = np.asarray(noisy, dtype=float) - clean
    return 10.0 * math.log10(float(np.sum(clean * clean)) / float(np.sum(noise * noise)))


def simulate(cfg: SimConfig, sim: int) -> tuple[SpectralBundles, PixelBatch]:
    """Bundles plus a noisy SIM1/SIM2 batch for ``cfg``."""
    if sim not in (1, 2):
        raise ValueError("sim must be 1 or 2")
    bundles = generate_bundles(cfg)
    clean = generate_sim1(bundles, cfg) if sim == 1 else generate_sim2(bundles, cfg)
    snr_tag = 0 if cfg.snr_db is None or math.isinf(cfg.snr_db) else 10**9 + int(round(cfg.snr_db * 1000))
    return bundles, add_noise(clean, cfg.snr_db, cfg.rng(_STREAM_NOISE, sim, snr_tag))


def with_snr(cfg: SimConfig, snr_db: Optional[float]) -> SimConfig:
    return replace(cfg, snr_db=snr_db)
