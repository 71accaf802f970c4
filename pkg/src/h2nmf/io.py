"""Data ingestion and artifact export.

Formats:

* cube: magic line ``H2NMF-CUBE/1``, a header line ``<m> <width> <height>
  float32 little``, then the float32 little-endian payload laid out
  band-interleaved-by-pixel (each pixel's m values contiguous, pixels in
  row-major image order).
* matrix CSV: rectangular numeric text, rows are bands.
* cluster maps: binary PPM with a fixed 16-color palette (label k maps to
  palette[k mod 16]); abundance maps: binary 8-bit PGM, min-max normalized
  per image with the bounds recorded in a ``.bounds.txt`` sidecar.

All writers are deterministic byte-for-byte given identical inputs.
"""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataMatrix",
    "FormatError",
    "CubeFormatError",
    "CsvFormatError",
    "CUBE_MAGIC",
    "PALETTE",
    "load_cube",
    "save_cube",
    "load_matrix_csv",
    "encode_pgm",
    "encode_ppm",
    "cluster_map_image",
    "abundance_image",
    "write_endmembers_csv",
]

CUBE_MAGIC = b"H2NMF-CUBE/1"


class FormatError(ValueError):
    """Base class for malformed input files."""


class CubeFormatError(FormatError):
    """Cube file violation; ``code`` is one of magic-mismatch,
    truncated-payload, size-mismatch."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class CsvFormatError(FormatError):
    pass


@dataclass
class DataMatrix:
    """m x n matrix of spectra-as-columns with optional image geometry.

    ``geometry`` is (width, height) with width*height == n.
    ``clamped_negatives`` counts entries clamped to zero on load.
    """

    data: np.ndarray
    geometry: tuple[int, int] | None = None
    clamped_negatives: int = 0


def save_cube(path, matrix, geometry: tuple[int, int] | None = None) -> None:
    """Write a cube file; geometry defaults to the matrix's own."""
    if isinstance(matrix, DataMatrix):
        data = matrix.data
        geometry = geometry or matrix.geometry
    else:
        data = np.asarray(matrix, dtype=np.float64)
    if geometry is None:
        raise ValueError("cube files require image geometry")
    width, height = int(geometry[0]), int(geometry[1])
    m, n = data.shape
    if width * height != n:
        raise ValueError("geometry does not match column count")
    payload = np.ascontiguousarray(data.T, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(CUBE_MAGIC + b"\n")
        fh.write(f"{m} {width} {height} float32 little\n".encode("ascii"))
        fh.write(payload.tobytes())


def load_cube(path) -> DataMatrix:
    """Read a cube file; negative values clamp to zero with a count."""
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != CUBE_MAGIC:
            raise CubeFormatError("magic-mismatch", f"bad magic {magic!r}")
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 5 or header[3] != "float32" or header[4] != "little":
            raise CubeFormatError("size-mismatch", f"bad header {header!r}")
        try:
            m, width, height = (int(v) for v in header[:3])
        except ValueError:
            raise CubeFormatError("size-mismatch", f"bad header {header!r}") from None
        if m < 1 or width * height < 1:
            raise CubeFormatError("size-mismatch", "nonpositive dimensions")
        expected = m * width * height * 4
        payload = fh.read()
    if len(payload) < expected:
        raise CubeFormatError(
            "truncated-payload", f"expected {expected} bytes, got {len(payload)}"
        )
    if len(payload) > expected:
        raise CubeFormatError(
            "size-mismatch", f"expected {expected} bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(width * height, m)
    data = data.T.astype(np.float64)
    negatives = int(np.count_nonzero(data < 0))
    if negatives:
        data = np.maximum(data, 0.0)
    return DataMatrix(
        data=data, geometry=(width, height), clamped_negatives=negatives
    )


def load_matrix_csv(path) -> DataMatrix:
    """Read a rectangular numeric CSV (rows are bands); no geometry."""
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        for lineno, record in enumerate(_csv.reader(fh), start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            try:
                rows.append([float(cell) for cell in record])
            except ValueError:
                raise CsvFormatError(f"non-numeric cell on line {lineno}") from None
            if len(rows[-1]) != len(rows[0]):
                raise CsvFormatError(f"ragged row on line {lineno}")
    if not rows:
        raise CsvFormatError("empty CSV")
    data = np.asarray(rows, dtype=np.float64)
    negatives = int(np.count_nonzero(data < 0))
    if negatives:
        data = np.maximum(data, 0.0)
    return DataMatrix(data=data, geometry=None, clamped_negatives=negatives)


# fixed 16-color palette for cluster maps (RGB)
PALETTE = (
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (210, 245, 60),
    (250, 190, 212),
    (0, 128, 128),
    (220, 190, 255),
    (170, 110, 40),
    (255, 250, 200),
    (128, 0, 0),
    (170, 255, 195),
)


def _check_geometry(length: int, geometry) -> tuple[int, int]:
    if geometry is None:
        raise ValueError("no image geometry")
    width, height = int(geometry[0]), int(geometry[1])
    if width * height != length:
        raise ValueError("geometry does not match value count")
    return width, height


def encode_ppm(labels, geometry) -> bytes:
    """Binary PPM of a label image via the fixed palette."""
    lab = np.asarray(labels, dtype=np.int64).reshape(-1)
    width, height = _check_geometry(lab.size, geometry)
    palette = np.asarray(PALETTE, dtype=np.uint8)
    rgb = palette[lab % 16]
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + rgb.reshape(height, width, 3).tobytes()


def encode_pgm(values, geometry):
    """Binary 8-bit PGM, min-max normalized; all-equal images render mid-gray.

    Returns ``(bytes, (vmin, vmax))`` so callers can persist the bounds.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    width, height = _check_geometry(v.size, geometry)
    vmin, vmax = float(v.min()), float(v.max())
    if vmax > vmin:
        scaled = np.rint((v - vmin) / (vmax - vmin) * 255.0).astype(np.uint8)
    else:
        scaled = np.full(v.size, 128, dtype=np.uint8)
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + scaled.reshape(height, width).tobytes(), (vmin, vmax)


def cluster_map_image(labels, geometry, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(labels, geometry))


def abundance_image(values, geometry, path) -> None:
    data, (vmin, vmax) = encode_pgm(values, geometry)
    with open(path, "wb") as fh:
        fh.write(data)
    with open(f"{path}.bounds.txt", "w") as fh:
        fh.write(f"min {vmin!r}\nmax {vmax!r}\n")


def write_endmembers_csv(path, endmembers) -> None:
    """Signatures as CSV: one column per endmember, header row of cluster ids."""
    signatures = np.asarray(endmembers.signatures, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow([f"cluster_{i}" for i in endmembers.leaf_ids])
        for row in signatures:
            writer.writerow([repr(float(v)) for v in row])
