"""From a probability map to estimated object locations.

Pipeline: pick a threshold tau (fixed, Otsu, or Beta-mixture), keep the
pixels with ``p > tau``, count them as 8-connected blobs, and fit a 2-D
Gaussian mixture with that many components.  The component means are the
estimated locations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.special import betaln, logsumexp

from .errors import (
    DegenerateFitError,
    DegenerateMapError,
    InsufficientDataError,
    MaskCountMismatchError,
    TooFewPointsError,
)
from .geometry import GridSpec, as_points
from .whd import check_map

OTSU_BINS = 256
BETA_CLAMP = 1e-4
BETA_VAR_FLOOR = 1e-10
MIN_WEIGHT = 1e-6
COV_FLOOR = 1e-6

_EIGHT = np.ones((3, 3), dtype=bool)


# -- threshold methods -------------------------------------------------------

@dataclass(frozen=True)
class ThresholdMethod:
    """``kind`` is ``"fixed"``, ``"otsu"`` or ``"bmm"``; ``tau`` only for fixed."""

    kind: str
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "otsu", "bmm"):
            raise ValueError(f"unknown threshold method {self.kind!r}")
        if self.kind == "fixed":
            if self.tau is None or not 0 <= self.tau <= 1:
                raise ValueError("fixed threshold needs tau in [0, 1]")

    @classmethod
    def fixed(cls, tau: float) -> "ThresholdMethod":
        return cls("fixed", float(tau))

    @classmethod
    def parse(cls, text: str) -> "ThresholdMethod":
        """Parse ``"otsu"``, ``"bmm"`` or ``"fixed:<tau>"``."""
        text = text.strip().lower()
        if text.startswith("fixed:"):
            try:
                return cls.fixed(float(text.split(":", 1)[1]))
            except ValueError as exc:
                raise ValueError(f"bad fixed threshold {text!r}") from exc
        return cls(text)

    def __str__(self):
        return f"fixed:{self.tau!r}" if self.kind == "fixed" else self.kind


def _otsu_scores(hist: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Between-class variance for splitting before bin k, k = 1..bins-1.

    Entries where one class is empty are ``-inf``.
    """
    n = hist.sum()
    c0 = np.cumsum(hist)[:-1]
    s0 = np.cumsum(hist * centers)[:-1]
    c1 = n - c0
    s1 = (hist * centers).sum() - s0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = s0 / c0
        mu1 = s1 / c1
        score = (c0 / n) * (c1 / n) * (mu1 - mu0) ** 2
    score[(c0 == 0) | (c1 == 0)] = -np.inf
    return score


def otsu_threshold(p) -> float:
    """Otsu's threshold over a 256-bin histogram of map values on [0, 1].

    Returns the bin edge maximizing between-class variance; the first edge
    wins ties.
    """
    p = check_map(p)
    if p.min() == p.max():
        raise DegenerateMapError("map is constant; no threshold separates it")
    hist, edges = np.histogram(p, bins=OTSU_BINS, range=(0.0, 1.0))
    centers = 0.5 * (edges[:-1] + edges[1:])
    score = _otsu_scores(hist.astype(np.float64), centers)
    if not np.isfinite(score).any():
        raise DegenerateMapError("all map values fall in a single histogram bin")
    k = int(np.argmax(score)) + 1
    return float(edges[k])


# -- Beta mixture ------------------------------------------------------------

@dataclass
class BetaMixture:
    a: np.ndarray
    b: np.ndarray
    weights: np.ndarray
    log_likelihood: list = field(default_factory=list, repr=False)
    n_iter: int = 0

    @property
    def means(self) -> np.ndarray:
        return self.a / (self.a + self.b)

    @property
    def high(self) -> int:
        return int(np.argmax(self.means))

    def component_log_pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return (
            (self.a[:, None] - 1) * np.log(x)[None, :]
            + (self.b[:, None] - 1) * np.log1p(-x)[None, :]
            - betaln(self.a, self.b)[:, None]
        )

    def score(self, x) -> float:
        """Total log-likelihood of ``x``."""
        lp = self.component_log_pdf(x) + np.log(self.weights)[:, None]
        return float(logsumexp(lp, axis=0).sum())


def _beta_moments(x, r):
    """Weighted method-of-moments Beta parameters for responsibilities r."""
    w = r.sum()
    m = float(r @ x / w)
    var = float(r @ (x - m) ** 2 / w)
    # method of moments needs var < m(1-m)
    var = min(max(var, BETA_VAR_FLOOR), 0.999 * m * (1 - m))
    common = m * (1 - m) / var - 1
    return m * common, (1 - m) * common


def _weighted_beta_ll(x, r, a, b):
    return float(r @ ((a - 1) * np.log(x) + (b - 1) * np.log1p(-x)) - r.sum() * betaln(a, b))


def fit_beta_mixture(values, max_iter: int = 200, tol: float = 1e-8) -> BetaMixture:
    """Two-component Beta mixture by EM with a method-of-moments M-step.

    A moment update for a component is accepted only when it raises that
    component's share of the expected complete-data log-likelihood, so the
    observed log-likelihood never decreases (generalized EM).  Iteration
    stops when the log-likelihood gain drops below ``tol`` (relative) or no
    moment update is accepted.
    """
    x = np.clip(np.asarray(values, dtype=np.float64).ravel(), BETA_CLAMP, 1 - BETA_CLAMP)
    if x.size < 10:
        raise InsufficientDataError(f"need at least 10 values, got {x.size}")
    if x.min() == x.max():
        raise DegenerateFitError("all values identical")

    # soft initial split: larger values lean towards the second component
    resp = np.vstack([1 - x, x])
    a = np.empty(2)
    b = np.empty(2)
    for j in range(2):
        a[j], b[j] = _beta_moments(x, resp[j])
    mix = BetaMixture(a, b, resp.sum(axis=1) / x.size)
    ll = mix.score(x)
    mix.log_likelihood.append(ll)

    for it in range(1, max_iter + 1):
        lp = mix.component_log_pdf(x) + np.log(mix.weights)[:, None]
        resp = np.exp(lp - logsumexp(lp, axis=0))
        weights = resp.sum(axis=1) / x.size
        if weights.min() < MIN_WEIGHT:
            raise DegenerateFitError(f"component weight collapsed to {weights.min():.3g}")
        a, b = mix.a.copy(), mix.b.copy()
        changed = False
        for j in range(2):
            na, nb = _beta_moments(x, resp[j])
            if _weighted_beta_ll(x, resp[j], na, nb) > _weighted_beta_ll(x, resp[j], a[j], b[j]):
                a[j], b[j] = na, nb
                changed = True
        mix = BetaMixture(a, b, weights, mix.log_likelihood, it)
        new_ll = mix.score(x)
        mix.log_likelihood.append(new_ll)
        if not changed or abs(new_ll - ll) <= tol * max(1.0, abs(ll)):
            break
        ll = new_ll

    if abs(mix.means[0] - mix.means[1]) < 1e-3:
        raise DegenerateFitError("components are indistinguishable")
    return mix


@dataclass
class ThresholdChoice:
    tau: float
    fallback_used: bool = False
    reason: str | None = None
    mixture: BetaMixture | None = None


def bmm_threshold_info(p) -> ThresholdChoice:
    """Beta-mixture threshold with Otsu fallback and the reason for it."""
    p = check_map(p)
    try:
        mix = fit_beta_mixture(p)
    except (DegenerateFitError, InsufficientDataError) as exc:
        reason = str(exc)
        mix = None
    else:
        tau = float(mix.means[mix.high])
        if (p > tau).any():
            return ThresholdChoice(tau, mixture=mix)
        # high component is a point mass at the map maximum; p > tau keeps nothing
        reason = "no pixel lies above the high-component mean"
    try:
        return ThresholdChoice(otsu_threshold(p), True, reason, mix)
    except DegenerateMapError:
        # constant map: threshold at its value so the mask is empty
        return ThresholdChoice(float(p.max()), True, reason + "; otsu degenerate", mix)


def bmm_threshold(p) -> float:
    return bmm_threshold_info(p).tau


# -- counting and Gaussian mixture -------------------------------------------

def estimate_count(p, mask) -> int:
    """Number of 8-connected components of ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    if np.shape(p) != mask.shape:
        raise ValueError("mask and map shapes differ")
    _, n = ndimage.label(mask, structure=_EIGHT)
    return int(n)


@dataclass
class GaussianMixture2D:
    means: np.ndarray  # (k, 2)
    covariances: np.ndarray  # (k, 2, 2)
    weights: np.ndarray  # (k,)
    log_likelihood: list = field(default_factory=list, repr=False)
    n_iter: int = 0

    @property
    def k(self) -> int:
        return len(self.weights)


def _gauss_log_pdf(X, mean, cov):
    diff = X - mean
    inv = np.linalg.inv(cov)
    maha = np.einsum("ni,ij,nj->n", diff, inv, diff)
    _, logdet = np.linalg.slogdet(cov)
    return -0.5 * (maha + logdet) - math.log(2 * math.pi)


def _floor_cov(cov):
    # nearest covariance with eigenvalues >= floor: the constrained M-step optimum
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, COV_FLOOR)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def _farthest_point_seeds(X, k, rng):
    idx = [int(rng.integers(len(X)))]
    dist = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(dist))  # argmax picks the lowest index on ties
        idx.append(nxt)
        dist = np.minimum(dist, np.sum((X - X[nxt]) ** 2, axis=1))
    return np.array(idx)


def fit_gmm(points, k: int, seed: int = 0, max_iter: int = 200, tol: float = 1e-8) -> GaussianMixture2D:
    """Full-covariance 2-D Gaussian mixture by EM.

    Seeds are chosen by farthest-point traversal (the first drawn from
    ``seed``); every point is assigned to its nearest seed and EM starts from
    the resulting M-step.  Covariance eigenvalues are floored at 1e-6 px^2.
    """
    X = as_points(points)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(X) < k:
        raise TooFewPointsError(f"{len(X)} points cannot support {k} components")
    n = len(X)
    rng = np.random.default_rng(seed)
    seeds = X[_farthest_point_seeds(X, k, rng)]

    def log_joint(means, covs, weights):
        return np.stack([_gauss_log_pdf(X, means[j], covs[j]) for j in range(k)]) + np.log(weights)[:, None]

    def m_step(resp, means, covs):
        nk = resp.sum(axis=1)
        means, covs = means.copy(), covs.copy()
        for j in np.flatnonzero(nk > 0):
            r = resp[j]
            means[j] = r @ X / nk[j]
            diff = X - means[j]
            covs[j] = _floor_cov((r[:, None] * diff).T @ diff / nk[j])
        # an empty component keeps its parameters with zero weight
        return means, covs, nk / n

    # hard assignment to the nearest seed, then a first M-step
    nearest = np.argmin(np.sum((X[:, None, :] - seeds[None]) ** 2, axis=2), axis=1)
    resp = np.zeros((k, n))
    resp[nearest, np.arange(n)] = 1.0
    means, covs, weights = m_step(resp, seeds, np.repeat(COV_FLOOR * np.eye(2)[None], k, axis=0))

    with np.errstate(divide="ignore"):
        lj = log_joint(means, covs, weights)
    ll = float(logsumexp(lj, axis=0).sum())
    history = [ll]
    it = 0
    for it in range(1, max_iter + 1):
        resp = np.exp(lj - logsumexp(lj, axis=0))
        means, covs, weights = m_step(resp, means, covs)
        with np.errstate(divide="ignore"):
            lj = log_joint(means, covs, weights)
        new_ll = float(logsumexp(lj, axis=0).sum())
        history.append(new_ll)
        if abs(new_ll - ll) <= tol * max(1.0, abs(ll)):
            break
        ll = new_ll
    return GaussianMixture2D(means, covs, weights, history, it)


# -- full pipeline -----------------------------------------------------------

@dataclass
class LocalizationResult:
    tau: float
    mask: np.ndarray
    count_estimate: int
    locations: np.ndarray
    mixture: GaussianMixture2D | None = None
    method: str = ""
    fallback_used: bool = False
    fallback_reason: str | None = None


def localize(p, method: ThresholdMethod = ThresholdMethod("bmm"), count_override: int | None = None,
             seed: int = 0) -> LocalizationResult:
    p = check_map(p)
    fallback, reason = False, None
    if method.kind == "fixed":
        tau = method.tau
    elif method.kind == "otsu":
        tau = otsu_threshold(p)
    else:
        choice = bmm_threshold_info(p)
        tau, fallback, reason = choice.tau, choice.fallback_used, choice.reason

    mask = p > tau
    if count_override is not None:
        if count_override < 0:
            raise ValueError("count_override must be >= 0")
        count = int(count_override)
    else:
        count = estimate_count(p, mask)

    common = dict(method=str(method), fallback_used=fallback, fallback_reason=reason)
    if count == 0:
        return LocalizationResult(tau, mask, 0, np.empty((0, 2)), None, **common)
    coords = np.argwhere(mask).astype(np.float64)
    if len(coords) < count:
        raise MaskCountMismatchError(f"{len(coords)} thresholded pixels cannot hold {count} objects")
    gmm = fit_gmm(coords, count, seed=seed)
    grid = GridSpec(*p.shape)
    locations = np.clip(gmm.means, 0, [grid.height - 1, grid.width - 1])
    return LocalizationResult(tau, mask, count, locations, gmm, **common)
