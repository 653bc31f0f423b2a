"""Time-series to image transforms and image export.

Matrices are stored with row ``i`` / column ``j`` indexed by sample ``i`` /
``j`` (row 0 is the earliest sample). Plots that put the last sample on top
are a rendering choice; CSV and PGM exports keep the stored order.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np

from .traces import RSSI_CEIL, RSSI_FLOOR, Trace


class ImageKind(str, enum.Enum):
    RP = "rp"
    RP_BINARY = "rp_binary"
    GASF = "gasf"
    GADF = "gadf"
    SNAPSHOT = "snapshot"


@dataclass
class ImageMatrix:
    cells: np.ndarray
    kind: ImageKind

    @property
    def size(self) -> int:
        return self.cells.shape[0]


@dataclass
class PolarEncoding:
    scaled: np.ndarray
    angles: np.ndarray


def _series(trace, min_len: int = 1) -> np.ndarray:
    s = trace.values if isinstance(trace, Trace) else np.asarray(trace, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("expected a one-dimensional series")
    if len(s) < min_len:
        raise ValueError(f"series needs at least {min_len} samples")
    return s


def recurrence_plot(trace, epsilon: float | None = None, binarize: bool = False) -> ImageMatrix:
    """Pairwise distances ``|s_i - s_j|``, or ``Θ(ε - |s_i - s_j|)`` when binarized."""
    s = _series(trace, 2)
    dist = np.abs(s[:, None] - s[None, :])
    if not binarize:
        return ImageMatrix(dist, ImageKind.RP)
    if epsilon is None:
        raise ValueError("binarized recurrence plot needs epsilon")
    # Heaviside with Θ(0) = 1
    return ImageMatrix((epsilon - dist >= 0).astype(np.float64), ImageKind.RP_BINARY)


def minmax_rescale(trace) -> np.ndarray:
    """Map the series linearly onto [-1, 1]; a constant series maps to zeros."""
    s = _series(trace, 1)
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.zeros_like(s)
    return np.clip(2.0 * (s - lo) / (hi - lo) - 1.0, -1.0, 1.0)


def polar_encode(trace) -> PolarEncoding:
    x = minmax_rescale(trace)
    return PolarEncoding(scaled=x, angles=np.arccos(x))


def gasf(trace) -> ImageMatrix:
    """Gramian angular summation field ``cos(φ_i + φ_j)``."""
    _series(trace, 2)
    x = minmax_rescale(trace)
    # cos(a+b) = cos a cos b - sin a sin b, with sin(arccos x) = sqrt(1 - x^2);
    # avoids the rounding of arccos followed by cos
    r = np.sqrt(np.clip(1.0 - x * x, 0.0, 1.0))
    return ImageMatrix(np.outer(x, x) - np.outer(r, r), ImageKind.GASF)


def gadf(trace) -> ImageMatrix:
    """Gramian angular difference field ``sin(φ_i - φ_j)``."""
    _series(trace, 2)
    x = minmax_rescale(trace)
    r = np.sqrt(np.clip(1.0 - x * x, 0.0, 1.0))
    return ImageMatrix(np.outer(r, x) - np.outer(x, r), ImageKind.GADF)


def ts_snapshot(trace, rssi_floor: float = RSSI_FLOOR, rssi_ceil: float = RSSI_CEIL) -> ImageMatrix:
    """Binary N×N raster of the raw series, as a line plot would draw it.

    Column ``x`` holds a single 1 at the row of ``s_x`` quantized over
    ``[rssi_floor, rssi_ceil]``; row 0 is the ceiling, so a rising ramp
    draws the anti-diagonal.
    """
    s = _series(trace, 1)
    n = len(s)
    frac = (np.clip(s, rssi_floor, rssi_ceil) - rssi_floor) / (rssi_ceil - rssi_floor)
    level = np.rint(frac * (n - 1)).astype(int)
    cells = np.zeros((n, n))
    cells[n - 1 - level, np.arange(n)] = 1.0
    return ImageMatrix(cells, ImageKind.SNAPSHOT)


TRANSFORMS = {
    "rp": recurrence_plot,
    "gasf": gasf,
    "gadf": gadf,
    "snapshot": ts_snapshot,
}


def transform(trace, kind: str) -> ImageMatrix:
    try:
        fn = TRANSFORMS[kind]
    except KeyError:
        raise ValueError(f"unknown transform {kind!r}; choose from {sorted(TRANSFORMS)}") from None
    return fn(trace)


def model_input(matrix: ImageMatrix) -> np.ndarray:
    """Scale a transform output to roughly unit range for the classifier."""
    if matrix.kind is ImageKind.RP:
        return matrix.cells / float(RSSI_CEIL - RSSI_FLOOR)
    return matrix.cells


# -- export ------------------------------------------------------------------

def _cells(matrix) -> np.ndarray:
    return np.asarray(matrix.cells if isinstance(matrix, ImageMatrix) else matrix, dtype=np.float64)


def to_gray8(cells: np.ndarray) -> np.ndarray:
    lo, hi = float(cells.min()), float(cells.max())
    if hi == lo:
        return np.zeros(cells.shape, dtype=np.uint8)
    return np.rint((cells - lo) / (hi - lo) * 255.0).astype(np.uint8)


def _format_cell(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def export_image(matrix, fmt: str = "pgm") -> bytes:
    """Encode as binary PGM (P5, min-max mapped to 0..255) or full-precision CSV."""
    cells = _cells(matrix)
    if cells.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    fmt = fmt.lower()
    if fmt == "pgm":
        rows, cols = cells.shape
        return f"P5\n{cols} {rows}\n255\n".encode("ascii") + to_gray8(cells).tobytes()
    if fmt == "csv":
        out = io.StringIO()
        for row in cells:
            out.write(",".join(_format_cell(float(v)) for v in row))
            out.write("\n")
        return out.getvalue().encode("ascii")
    raise ValueError(f"unknown image format {fmt!r}; expected 'pgm' or 'csv'")


def read_csv_matrix(data: bytes | str) -> np.ndarray:
    text = data.decode("ascii") if isinstance(data, bytes) else data
    rows = [[float(v) for v in line.split(",")] for line in text.splitlines() if line.strip()]
    return np.array(rows, dtype=np.float64)


def read_pgm(data: bytes) -> np.ndarray:
    magic, dims, maxval, rest = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError("not an 8-bit binary PGM")
    cols, rows = (int(v) for v in dims.split())
    return np.frombuffer(rest, dtype=np.uint8, count=rows * cols).reshape(rows, cols)
