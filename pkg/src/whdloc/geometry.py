"""Point sets on a pixel grid and the classic set distances.

Coordinates are ``(row, col)`` in pixel units with the origin at the center
of the top-left pixel.  A point set is stored as a float64 array of shape
``(n, 2)``; storage order carries no meaning and never changes a result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptySetError

# Pixel block size when building distance tables, bounds peak memory.
_CHUNK = 4096


class Point(NamedTuple):
    row: float
    col: float


@dataclass(frozen=True)
class GridSpec:
    """Rectangular pixel grid ``{0..height-1} x {0..width-1}``."""

    height: int
    width: int

    def __post_init__(self):
        if int(self.height) != self.height or int(self.width) != self.width:
            raise ValueError(f"grid dimensions must be integers, got {self.height}x{self.width}")
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.height}x{self.width}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.height * self.width

    def pixel_coords(self) -> np.ndarray:
        """All pixel coordinates in row-major order, shape ``(H*W, 2)``."""
        rows, cols = np.indices(self.shape, dtype=np.float64)
        return np.column_stack([rows.ravel(), cols.ravel()])

    def contains(self, points) -> np.ndarray:
        pts = as_points(points)
        return (
            (pts[:, 0] >= 0)
            & (pts[:, 0] <= self.height - 1)
            & (pts[:, 1] >= 0)
            & (pts[:, 1] <= self.width - 1)
        )

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``"HxW"`` (e.g. ``"64x64"``)."""
        try:
            h, w = text.lower().split("x")
            return cls(int(h), int(w))
        except (ValueError, AttributeError) as exc:
            raise ValueError(f"grid size must look like HxW, got {text!r}") from exc

    def __str__(self):
        return f"{self.height}x{self.width}"


def as_points(points) -> np.ndarray:
    """Coerce ``points`` to a finite float64 array of shape ``(n, 2)``."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.float64)
    if arr.ndim == 1 and arr.shape[0] == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"point set must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def _require_nonempty(*sets):
    for s in sets:
        if len(s) == 0:
            raise EmptySetError("point set must be non-empty")


def euclidean(a, b) -> float:
    a = as_points(a)[0]
    b = as_points(b)[0]
    return math.hypot(a[0] - b[0], a[1] - b[1])


def pairwise_distances(X, Y) -> np.ndarray:
    """Euclidean distance table of shape ``(|X|, |Y|)``."""
    X = as_points(X)
    Y = as_points(Y)
    diff = X[:, None, :] - Y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def d_max(grid: GridSpec, scale=(1.0, 1.0)) -> float:
    """Largest distance between two pixels of ``grid`` (its diagonal).

    ``scale`` multiplies row and column extents, giving the diagonal in the
    coordinate space of a resized original image.
    """
    s_row, s_col = scale
    return math.hypot(s_row * (grid.height - 1), s_col * (grid.width - 1))


def _nearest(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """For each x in X, distance to its nearest neighbour in Y."""
    out = np.empty(len(X), dtype=np.float64)
    for start in range(0, len(X), _CHUNK):
        out[start:start + _CHUNK] = pairwise_distances(X[start:start + _CHUNK], Y).min(axis=1)
    return out


def hausdorff(X, Y) -> float:
    X = as_points(X)
    Y = as_points(Y)
    _require_nonempty(X, Y)
    return float(max(_nearest(X, Y).max(), _nearest(Y, X).max()))


def avg_hausdorff(X, Y) -> float:
    """Average Hausdorff distance: mean nearest-neighbour distance both ways."""
    X = as_points(X)
    Y = as_points(Y)
    _require_nonempty(X, Y)
    # fsum is exactly rounded, so the result does not depend on storage order
    return math.fsum(_nearest(X, Y)) / len(X) + math.fsum(_nearest(Y, X)) / len(Y)


def min_dist_field(grid: GridSpec, Y, scale=(1.0, 1.0)) -> np.ndarray:
    """Distance from every pixel of ``grid`` to its nearest point of ``Y``.

    Returns an array of shape ``grid.shape``.
    """
    Y = as_points(Y)
    _require_nonempty(Y)
    s = np.asarray(scale, dtype=np.float64)
    field = _nearest(grid.pixel_coords() * s, Y * s)
    return field.reshape(grid.shape)
