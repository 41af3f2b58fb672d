"""Localization and counting metrics.

Matching is a per-point proximity test, not a one-to-one assignment: an
estimate is a true positive if *some* ground-truth point lies within ``r``,
and a ground-truth point is missed if *no* estimate lies within ``r``.  Two
estimates on one object therefore both count as true positives; the count
metrics (MAE, RMSE, MAPE) are what expose that.

Quantities that are undefined (e.g. precision with no estimates) are
``None`` and carry a reason string, never NaN.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import GridSpec, as_points, avg_hausdorff, d_max, pairwise_distances


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int
    r: float


@dataclass
class PRF:
    precision: float | None
    recall: float | None
    fscore: float | None
    undefined: dict = field(default_factory=dict)


@dataclass
class CountMetrics:
    mae: float
    rmse: float
    mape: float | None
    mape_undefined: bool = False


@dataclass
class EvalReport:
    precision: float | None
    recall: float | None
    fscore: float | None
    ahd: float | None
    counts: MatchCounts
    undefined: dict = field(default_factory=dict)
    empty_estimate: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["counts"] = asdict(self.counts)
        return out


def match_at_radius(est, gt, r: float) -> MatchCounts:
    if r < 0:
        raise ValueError("radius must be >= 0")
    est = as_points(est)
    gt = as_points(gt)
    if len(est) == 0 or len(gt) == 0:
        return MatchCounts(tp=0, fp=len(est), fn=len(gt), r=float(r))
    D = pairwise_distances(est, gt)
    tp = int(np.count_nonzero(D.min(axis=1) <= r))
    fn = int(np.count_nonzero(D.min(axis=0) > r))
    return MatchCounts(tp=tp, fp=len(est) - tp, fn=fn, r=float(r))


def precision_recall_f(counts: MatchCounts) -> PRF:
    undefined = {}
    precision = recall = fscore = None
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        undefined["precision"] = "no estimated points"
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        undefined["recall"] = "no ground-truth points"
    if precision is None or recall is None:
        undefined["fscore"] = "precision or recall undefined"
    elif precision + recall == 0:
        fscore = 0.0
    else:
        fscore = 2 * precision * recall / (precision + recall)
    return PRF(precision, recall, fscore, undefined)


def f_vs_r_sweep(est, gt, radii) -> list[tuple[float, float | None]]:
    radii = [float(r) for r in radii]
    if any(b < a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be sorted ascending")
    return [(r, precision_recall_f(match_at_radius(est, gt, r)).fscore) for r in radii]


def count_metrics(true_counts, est_counts) -> CountMetrics:
    """MAE, RMSE and MAPE over a series of images.

    MAPE skips images with a true count of zero but still divides by the
    total number of images N.
    """
    C = np.asarray(true_counts, dtype=np.float64)
    Ch = np.asarray(est_counts, dtype=np.float64)
    if C.shape != Ch.shape or C.ndim != 1 or C.size == 0:
        raise ValueError("need two equal-length, non-empty count series")
    e = Ch - C
    n = C.size
    mae = math.fsum(np.abs(e)) / n
    rmse = math.sqrt(math.fsum(e * e) / n)
    nz = C != 0
    if not nz.any():
        return CountMetrics(mae, rmse, None, True)
    mape = 100.0 * math.fsum(np.abs(e[nz]) / C[nz]) / n
    return CountMetrics(mae, rmse, mape)


def eval_ahd(est, gt) -> float:
    return avg_hausdorff(est, gt)


def evaluate(est, gt, r: float = 5.0, grid: GridSpec | None = None) -> EvalReport:
    """Precision/recall/F-score at radius ``r`` and the AHD.

    When ``est`` is empty but ``gt`` is not, the AHD is reported as the
    grid's ``d_max`` (requires ``grid``) and ``empty_estimate`` is set.
    """
    est = as_points(est)
    gt = as_points(gt)
    counts = match_at_radius(est, gt, r)
    prf = precision_recall_f(counts)
    undefined = dict(prf.undefined)
    empty = len(est) == 0
    ahd = None
    if len(est) and len(gt):
        ahd = eval_ahd(est, gt)
    elif empty and len(gt) and grid is not None:
        ahd = d_max(grid)
    else:
        undefined["ahd"] = "empty point set" + ("" if grid is not None else " and no grid for d_max")
    return EvalReport(prf.precision, prf.recall, prf.fscore, ahd, counts, undefined, empty)
