"""Weighted Hausdorff distance between a probability map and a point set.

The loss has two terms.  The first averages, over all pixels weighted by
their activation, the distance to the nearest ground-truth point.  The
second, for every ground-truth point, takes a soft minimum (power mean with
negative exponent) over pixels of ``p*d + (1-p)*d_max``.

``alpha = -inf`` selects exact-min mode, where the soft minimum is the true
minimum.  That mode exists to test limiting identities; it has no gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    EmptyInputError,
    InvalidMapError,
    NonPositiveValueError,
    NonSmoothModeError,
)
from .geometry import GridSpec, Point, as_points, d_max, min_dist_field, pairwise_distances, _require_nonempty

# Floor for the soft-minimum arguments; 0**alpha is singular for alpha < 0.
ARG_FLOOR = 1e-12


@dataclass(frozen=True)
class ScaleTransform:
    """Diagonal map from resized-image pixels to original-image pixels."""

    s_row: float = 1.0
    s_col: float = 1.0

    def __post_init__(self):
        for v in (self.s_row, self.s_col):
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"scale factors must be positive and finite, got {v}")

    @classmethod
    def from_sizes(cls, original: tuple[int, int], resized: tuple[int, int]) -> "ScaleTransform":
        return cls(original[0] / resized[0], original[1] / resized[1])

    @property
    def factors(self) -> tuple[float, float]:
        return (self.s_row, self.s_col)

    def apply(self, pt) -> Point:
        row, col = pt
        return Point(self.s_row * row, self.s_col * col)


@dataclass(frozen=True)
class WhdParams:
    alpha: float = -1.0
    epsilon: float = 1e-6
    scale: ScaleTransform | None = None

    def __post_init__(self):
        if math.isnan(self.alpha) or not self.alpha < 0:
            raise ValueError(f"alpha must be negative (or -inf for exact min), got {self.alpha}")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")

    @classmethod
    def exact_min(cls, epsilon: float = 0.0, scale: ScaleTransform | None = None) -> "WhdParams":
        return cls(alpha=-math.inf, epsilon=epsilon, scale=scale)

    @property
    def exact_min_mode(self) -> bool:
        return self.alpha == -math.inf

    @property
    def scale_factors(self) -> tuple[float, float]:
        return self.scale.factors if self.scale is not None else (1.0, 1.0)


@dataclass
class LossBreakdown:
    total: float
    term1: float
    term2: float
    mass: float
    gradient: np.ndarray | None = field(default=None, repr=False)


def generalized_mean(values, alpha: float) -> float:
    """Power mean ``((1/n) * sum(v**alpha)) ** (1/alpha)``.

    ``alpha = -inf`` returns the minimum.  Evaluated in log space so large
    negative exponents neither overflow nor underflow.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInputError("generalized mean of an empty list")
    if alpha == -math.inf:
        return float(v.min())
    if alpha == 0 or math.isnan(alpha):
        raise ValueError("alpha must be non-zero")
    if np.any(v <= 0):
        raise NonPositiveValueError("generalized mean needs strictly positive values")
    if alpha == math.inf:
        return float(v.max())
    return float(np.exp((logsumexp(alpha * np.log(v)) - math.log(v.size)) / alpha))


def check_map(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.size == 0:
        raise InvalidMapError(f"probability map must be a non-empty 2-D array, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidMapError("probability map contains non-finite values")
    if p.min() < 0 or p.max() > 1:
        raise InvalidMapError(f"probability map values must lie in [0, 1], got [{p.min()}, {p.max()}]")
    return p


def _soft_min_columns(f: np.ndarray, alpha: float):
    """Column-wise power mean of ``f`` (pixels x points) and its derivative.

    Returns ``(M, dM/df)``; the derivative is ``None`` in exact-min mode.
    """
    if alpha == -math.inf:
        return f.min(axis=0), None
    a = alpha * np.log(f)
    amax = a.max(axis=0)
    e = np.exp(a - amax)
    s = e.sum(axis=0)
    M = np.exp((amax + np.log(s) - math.log(f.shape[0])) / alpha)
    # dM/df = M * (f/M)**alpha / (n * f), and (f/M)**alpha / n = e / s
    return M, (M / s) * e / f


class WhdEvaluator:
    """WHD for a fixed grid, point set and parameters.

    Distance tables are built once, which is what repeated evaluation inside
    an optimization loop needs.  Memory is ``O(H*W*|Y|)``.
    """

    def __init__(self, grid: GridSpec, Y, params: WhdParams = WhdParams()):
        Y = as_points(Y)
        _require_nonempty(Y)
        self.grid = grid
        self.params = params
        self.n_points = len(Y)
        scale = params.scale_factors
        self.dmax = d_max(grid, scale)
        self.nearest = min_dist_field(grid, Y, scale).ravel()
        s = np.asarray(scale, dtype=np.float64)
        self.dist_minus_dmax = pairwise_distances(grid.pixel_coords() * s, Y * s) - self.dmax

    def __call__(self, p, gradient: bool = False) -> LossBreakdown:
        p = check_map(p)
        if p.shape != self.grid.shape:
            raise InvalidMapError(f"map shape {p.shape} does not match grid {self.grid}")
        params = self.params
        if gradient and params.exact_min_mode:
            raise NonSmoothModeError("exact-min mode is not differentiable; use a finite negative alpha")
        flat = p.ravel()
        mass = float(flat.sum())
        denom = mass + params.epsilon
        weighted = float(flat @ self.nearest)
        term1 = weighted / denom if weighted != 0 else 0.0

        raw = flat[:, None] * self.dist_minus_dmax + self.dmax
        f = raw if params.exact_min_mode else np.maximum(raw, ARG_FLOOR)
        M, dM = _soft_min_columns(f, params.alpha)
        term2 = float(M.sum() / self.n_points)

        grad = None
        if gradient:
            dM = np.where(raw > ARG_FLOOR, dM, 0.0)
            grad2 = np.einsum("ij,ij->i", dM, self.dist_minus_dmax)
            grad1 = (self.nearest - term1) / denom
            grad = (grad1 + grad2 / self.n_points).reshape(p.shape)
        return LossBreakdown(total=term1 + term2, term1=term1, term2=term2, mass=mass, gradient=grad)


def whd(p, Y, params: WhdParams = WhdParams(), *, gradient: bool = False) -> LossBreakdown:
    """Weighted Hausdorff distance of map ``p`` (shape ``(H, W)``) to ``Y``.

    With ``gradient=True`` the returned breakdown carries ``d total / d p``
    with the map's shape.
    """
    p = check_map(p)
    return WhdEvaluator(GridSpec(*p.shape), Y, params)(p, gradient)


def whd_gradient(p, Y, params: WhdParams = WhdParams()) -> np.ndarray:
    return whd(p, Y, params, gradient=True).gradient


def huber(x: float) -> float:
    """Smooth L1: quadratic inside ``|x| < 1``, linear outside."""
    ax = abs(x)
    return 0.5 * x * x if ax < 1 else ax - 0.5


def huber_derivative(x: float) -> float:
    return x if abs(x) < 1 else math.copysign(1.0, x)


def combined_loss(p, Y, c_hat: float, params: WhdParams = WhdParams()) -> float:
    """WHD plus the Huber count-regression term on ``|Y| - c_hat``."""
    if not math.isfinite(c_hat):
        raise ValueError("count estimate must be finite")
    Y = as_points(Y)
    return whd(p, Y, params).total + huber(len(Y) - c_hat)
