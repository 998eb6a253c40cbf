"""CSV and PGM file formats.

Every CSV starts with a ``# memmunmix-csv <kind> v<version>`` line. Loaders
refuse other kinds or versions. User-supplied bundle libraries may omit the
line. Matrices are stored with one row per band (spectra) or per
atom/class (abundances) and one column per pixel. Floats are written with
``repr`` so a write/read round trip is exact.
"""
from __future__ import annotations

import csv
import gzip
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import PixelBatch, SpectralBundles, Truth

SCHEMA_VERSION = 1
_MAGIC = "# memmunmix-csv"


class FormatError(ValueError):
    """A file does not follow the expected layout."""


def _open(path, mode: str):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", newline="")
    return open(path, mode, newline="")


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path, kind: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with _open(path, "w") as fh:
        fh.write(f"{_MAGIC} {kind} v{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else _fmt(c) for c in row])


def _read_rows(path, kind: str, require_magic: bool = True):
    """Return (header, rows, first data line number)."""
    path = Path(path)
    try:
        with _open(path, "r") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    start = 0
    if lines and lines[0].startswith("#"):
        parts = lines[0].split()
        if len(parts) != 4 or " ".join(parts[:2]) != _MAGIC:
            raise FormatError(f"{path}:1: unrecognized comment header {lines[0]!r}")
        if parts[2] != kind:
            raise FormatError(f"{path}:1: expected a '{kind}' file, found '{parts[2]}'")
        if parts[3] != f"v{SCHEMA_VERSION}":
            raise FormatError(
                f"{path}:1: schema version {parts[3]} is not supported (this build reads v{SCHEMA_VERSION}); "
                "regenerate the file with this version"
            )
        start = 1
    elif require_magic:
        raise FormatError(f"{path}:1: missing '{_MAGIC} {kind} v{SCHEMA_VERSION}' header line")
    body = list(csv.reader(lines[start:]))
    if not body:
        raise FormatError(f"{path}: no header row")
    return body[0], body[1:], start + 2


def _parse_matrix(path, rows, first_line: int, ncols: int, skip: int = 0) -> np.ndarray:
    out = np.empty((len(rows), ncols))
    for i, row in enumerate(rows):
        lineno = first_line + i
        if len(row) != ncols + skip:
            raise FormatError(f"{path}:{lineno}: expected {ncols + skip} fields, found {len(row)}")
        try:
            out[i] = [float(v) for v in row[skip:]]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not np.all(np.isfinite(out)):
        bad = int(np.argwhere(~np.isfinite(out))[0, 0])
        raise FormatError(f"{path}:{first_line + bad}: non-finite value")
    return out


# ---------------------------------------------------------------------------
# Bundles: rows are bands; columns "class:<name>:<atom>"
# ---------------------------------------------------------------------------

def write_bundles(path, bundles: SpectralBundles, wavelengths: Optional[Sequence[float]] = None) -> None:
    wl = np.arange(bundles.n_bands, dtype=float) if wavelengths is None else np.asarray(wavelengths, float)
    header = ["wavelength"]
    for name, size in zip(bundles.class_names, bundles.atoms_per_class):
        header += [f"class:{name}:{j}" for j in range(size)]
    rows = ([wl[i], *bundles.atoms[i]] for i in range(bundles.n_bands))
    _write_rows(path, "bundles", header, rows)


def read_bundles(path) -> SpectralBundles:
    """Read a bundle library; atoms of one class must be contiguous."""
    header, rows, first = _read_rows(path, "bundles", require_magic=False)
    if not header or header[0] != "wavelength":
        raise FormatError(f"{path}:{first - 1}: first column must be 'wavelength'")
    names: list[str] = []
    sizes: list[int] = []
    for col in header[1:]:
        parts = col.split(":")
        if len(parts) < 3 or parts[0] != "class":
            raise FormatError(f"{path}:{first - 1}: column {col!r} is not of the form class:<name>:<atom>")
        name = ":".join(parts[1:-1])
        if names and names[-1] == name:
            sizes[-1] += 1
        elif name in names:
            raise FormatError(f"{path}:{first - 1}: atoms of class {name!r} are not contiguous")
        else:
            names.append(name)
            sizes.append(1)
    if not names:
        raise FormatError(f"{path}:{first - 1}: no atom columns")
    data = _parse_matrix(path, rows, first, len(header) - 1, skip=1)
    try:
        return SpectralBundles(data, tuple(sizes), tuple(names))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Generic labelled matrices: first column is the row label
# ---------------------------------------------------------------------------

def write_matrix(path, kind: str, row_labels: Sequence[str], matrix: np.ndarray, col_prefix: str = "pixel") -> None:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    header = ["row"] + [f"{col_prefix}{p}" for p in range(matrix.shape[1])]
    _write_rows(path, kind, header, ([lab, *matrix[i]] for i, lab in enumerate(row_labels)))


def read_matrix(path, kind: str) -> tuple[list[str], np.ndarray]:
    header, rows, first = _read_rows(path, kind)
    if not header or header[0] != "row":
        raise FormatError(f"{path}:{first - 1}: first column must be 'row'")
    labels = [r[0] if r else "" for r in rows]
    return labels, _parse_matrix(path, rows, first, len(header) - 1, skip=1)


def atom_labels(bundles: SpectralBundles) -> list[str]:
    return [f"{name}:{j}" for name, size in zip(bundles.class_names, bundles.atoms_per_class) for j in range(size)]


def write_pixels(path, batch: PixelBatch) -> None:
    write_matrix(path, "pixels", [f"band{i}" for i in range(batch.n_bands)], batch.spectra)


def read_pixels(path) -> PixelBatch:
    _, y = read_matrix(path, "pixels")
    return PixelBatch(y)


def write_truth(path, bundles: SpectralBundles, truth: Truth) -> None:
    """Abundances (K rows, ``a:`` labels) stacked over multiple abundances (N rows, ``r:``)."""
    labels = [f"a:{n}" for n in bundles.class_names] + [f"r:{lab}" for lab in atom_labels(bundles)]
    data = np.vstack([truth.abundances, truth.multiple])
    if truth.bundling is not None:
        labels += [f"b:{lab}" for lab in atom_labels(bundles)]
        data = np.vstack([data, truth.bundling])
    write_matrix(path, "truth", labels, data)


def read_truth(path, bundles: SpectralBundles) -> Truth:
    labels, data = read_matrix(path, "truth")
    k, n = bundles.n_classes, bundles.n_atoms
    if data.shape[0] not in (k + n, k + 2 * n):
        raise FormatError(
            f"{path}: {data.shape[0]} rows do not match the bundles ({k} classes, {n} atoms)"
        )
    bundling = data[k + n:] if data.shape[0] == k + 2 * n else None
    return Truth(data[:k], data[k:k + n], bundling)


def write_objective_traces(path, traces: Sequence[np.ndarray]) -> None:
    """Long format: one row per (pixel, iteration)."""
    rows = ([str(p), str(t), v] for p, tr in enumerate(traces) for t, v in enumerate(tr))
    _write_rows(path, "objective_trace", ["pixel", "iteration", "objective"], rows)


def read_objective_traces(path) -> list[np.ndarray]:
    header, rows, first = _read_rows(path, "objective_trace")
    out: dict[int, list[float]] = {}
    for i, row in enumerate(rows):
        try:
            out.setdefault(int(row[0]), []).append(float(row[2]))
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path}:{first + i}: {exc}") from exc
    return [np.asarray(out[p]) for p in sorted(out)]


def write_table(path, kind: str, rows: Sequence[dict], columns: Sequence[str]) -> None:
    """Rows of dicts; missing or None entries are written as empty fields."""
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v)).lower()
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return _fmt(v)
        return str(v)
    _write_rows(path, kind, list(columns), ([cell(r.get(c)) for c in columns] for r in rows))


def read_table(path, kind: str) -> list[dict]:
    header, rows, _ = _read_rows(path, kind)
    return [dict(zip(header, r)) for r in rows]


# ---------------------------------------------------------------------------
# PGM maps
# ---------------------------------------------------------------------------

def quantize(values) -> np.ndarray:
    return np.clip(np.rint(255.0 * np.asarray(values, dtype=float)), 0, 255).astype(np.uint8)


def write_pgm(path, values, width: int, height: int) -> None:
    """8-bit binary PGM (P5) of ``values`` laid out row-major."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size != width * height:
        raise FormatError(f"{values.size} pixels cannot fill a {width}x{height} map")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(quantize(values).tobytes())


def read_pgm(path) -> np.ndarray:
    """(height, width) uint8 array from a P5 file written by :func:`write_pgm`."""
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise FormatError(f"{path}: not an 8-bit P5 image")
    width, height = int(fields[1]), int(fields[2])
    data = np.frombuffer(raw[pos + 1:pos + 1 + width * height], dtype=np.uint8)
    if data.size != width * height:
        raise FormatError(f"{path}: truncated pixel data")
    return data.reshape(height, width)


def write_maps(out_dir, abundances: np.ndarray, class_names: Sequence[str], width: int, height: int) -> list[Path]:
    abundances = np.asarray(abundances, dtype=float)
    if abundances.shape[1] != width * height:
        raise FormatError(
            f"{abundances.shape[1]} pixels do not match a {width}x{height} map ({width * height} pixels)"
        )
    out = []
    for k, name in enumerate(class_names):
        safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)
        p = Path(out_dir) / f"map_{k:02d}_{safe}.pgm"
        write_pgm(p, abundances[k], width, height)
        out.append(p)
    return out
