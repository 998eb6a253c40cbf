"""Bundle dictionary, pixel batches and the two-layer abundance algebra.

Vectors follow the column convention used throughout the package: a single
pixel is a 1-D array, a batch of pixels is a 2-D array with one pixel per
column. Every helper here works on axis 0, so both shapes are accepted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

SIMPLEX_TOL = 1e-9


class DimensionError(ValueError):
    """Array shapes are inconsistent with the bundle dictionary."""


class GroupingMap:
    """Class partition of the dictionary atoms into contiguous blocks.

    Stands in for the 0/1 grouping matrix whose k-th column flags the atoms
    of class k. It is never materialized: aggregation and expansion are range
    operations over the blocks.
    """

    def __init__(self, sizes: Sequence[int]):
        sizes = np.asarray(sizes, dtype=np.intp)
        if sizes.ndim != 1 or sizes.size == 0 or np.any(sizes < 1):
            raise ValueError("every class needs at least one atom")
        self.sizes = sizes
        self.starts = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.intp)
        self.stops = self.starts + sizes
        self.class_of_atom = np.repeat(np.arange(sizes.size), sizes)

    @property
    def n_classes(self) -> int:
        return int(self.sizes.size)

    @property
    def n_atoms(self) -> int:
        return int(self.sizes.sum())

    @property
    def slices(self) -> list[slice]:
        return [slice(int(s), int(e)) for s, e in zip(self.starts, self.stops)]

    def _check(self, x: np.ndarray, n: int, what: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim not in (1, 2) or x.shape[0] != n:
            raise DimensionError(f"{what} must have {n} rows, got shape {x.shape}")
        return x

    def aggregate(self, r) -> np.ndarray:
        """Sum per-atom values within each class (G^T r)."""
        r = self._check(r, self.n_atoms, "multiple abundance")
        return np.add.reduceat(r, self.starts, axis=0)

    def expand(self, a) -> np.ndarray:
        """Repeat per-class values onto the atoms of each class (G a)."""
        a = self._check(a, self.n_classes, "abundance")
        return a[self.class_of_atom]

    def block_l0(self, b) -> np.ndarray:
        """Nonzero count of each class block."""
        b = self._check(b, self.n_atoms, "bundling vector")
        return np.add.reduceat((b != 0).astype(np.intp), self.starts, axis=0)

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupingMap) and np.array_equal(self.sizes, other.sizes)

    def __repr__(self) -> str:
        return f"GroupingMap(sizes={self.sizes.tolist()})"


@dataclass(frozen=True, eq=False)
class SpectralBundles:
    """Endmember bundles E = [E_1 | ... | E_K], one column per atom.

    Parameters
    ----------
    atoms : (L, N) array
        Nonnegative reflectances. Class blocks are contiguous.
    atoms_per_class : sequence of int
        Block sizes N_1..N_K, summing to N.
    class_names : sequence of str, optional
        Labels, defaults to ``class0``, ``class1``...
    """

    atoms: np.ndarray
    atoms_per_class: tuple
    class_names: tuple = ()

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float, copy=True)
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise DimensionError(f"atoms must be an (L, N) matrix, got shape {atoms.shape}")
        sizes = tuple(int(n) for n in self.atoms_per_class)
        if not sizes or min(sizes) < 1:
            raise ValueError("need K >= 1 classes with at least one atom each")
        if sum(sizes) != atoms.shape[1]:
            raise DimensionError(
                f"atoms_per_class sums to {sum(sizes)} but the matrix has {atoms.shape[1]} columns"
            )
        if not np.all(np.isfinite(atoms)):
            raise ValueError("reflectances must be finite")
        if np.any(atoms < 0):
            raise ValueError("reflectances must be nonnegative")
        names = tuple(str(c) for c in self.class_names) or tuple(f"class{k}" for k in range(len(sizes)))
        if len(names) != len(sizes):
            raise ValueError("one class name per class is required")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "atoms_per_class", sizes)
        object.__setattr__(self, "class_names", names)

    @property
    def n_bands(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.atoms_per_class)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    @cached_property
    def grouping(self) -> GroupingMap:
        return GroupingMap(self.atoms_per_class)

    @property
    def class_of_atom(self) -> np.ndarray:
        return self.grouping.class_of_atom

    @cached_property
    def gram(self) -> np.ndarray:
        g = self.atoms.T @ self.atoms
        g.setflags(write=False)
        return g

    def block(self, k: int) -> np.ndarray:
        return self.atoms[:, self.grouping.slices[k]]


@dataclass(frozen=True, eq=False)
class Truth:
    """Ground truth for a synthetic batch, one pixel per column.

    ``abundances`` is (K, P), ``multiple`` is (N, P) and ``bundling`` (N, P)
    when the generator produced bundling coefficients.
    """

    abundances: np.ndarray
    multiple: np.ndarray
    bundling: Optional[np.ndarray] = None

    @property
    def class_supports(self) -> list[frozenset]:
        return [frozenset(np.flatnonzero(col).tolist()) for col in self.abundances.T]

    @property
    def atom_supports(self) -> list[frozenset]:
        return [frozenset(np.flatnonzero(col).tolist()) for col in self.multiple.T]


@dataclass(frozen=True, eq=False)
class PixelBatch:
    """Observed spectra (L, P) with optional truth and noise level."""

    spectra: np.ndarray
    truth: Optional[Truth] = None
    snr_db: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.spectra, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2:
            raise DimensionError(f"spectra must be (L, P), got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("spectra must be finite")
        object.__setattr__(self, "spectra", y)
        if self.truth is not None and self.truth.abundances.shape[1] != y.shape[1]:
            raise DimensionError("truth and spectra disagree on the pixel count")

    @property
    def n_pixels(self) -> int:
        return self.spectra.shape[1]

    @property
    def n_bands(self) -> int:
        return self.spectra.shape[0]

    def subset(self, idx) -> "PixelBatch":
        idx = np.asarray(idx, dtype=np.intp)
        truth = None
        if self.truth is not None:
            t = self.truth
            truth = Truth(
                t.abundances[:, idx],
                t.multiple[:, idx],
                None if t.bundling is None else t.bundling[:, idx],
            )
        return PixelBatch(self.spectra[:, idx], truth, self.snr_db, dict(self.meta))


def aggregate_abundance(r, g: GroupingMap) -> np.ndarray:
    """Per-class abundances from per-atom abundances; not renormalized."""
    return g.aggregate(r)


def compose_r(b, a, g: GroupingMap) -> np.ndarray:
    """Multiple abundances r = B a, with B the block-diagonal bundling matrix."""
    b = g._check(b, g.n_atoms, "bundling vector")
    a = g.expand(a)
    if b.shape != a.shape:
        raise DimensionError(f"bundling {b.shape} and abundance {a.shape} disagree on pixels")
    return b * a


def reconstruct(bundles: SpectralBundles, r) -> np.ndarray:
    r = bundles.grouping._check(r, bundles.n_atoms, "multiple abundance")
    return bundles.atoms @ r


def equivalent_endmembers(bundles: SpectralBundles, b) -> np.ndarray:
    """Per-pixel endmember matrix E B, shape (L, K) for a single pixel."""
    b = bundles.grouping._check(b, bundles.n_atoms, "bundling vector")
    if b.ndim != 1:
        raise DimensionError("equivalent_endmembers takes one pixel at a time")
    return np.column_stack([bundles.block(k) @ b[s] for k, s in enumerate(bundles.grouping.slices)])


def check_simplex(a, tol: float = SIMPLEX_TOL) -> bool:
    a = np.asarray(a, dtype=float)
    return bool(np.all(a >= -tol) and np.all(np.abs(a.sum(axis=0) - 1.0) <= tol))
