"""Direct optimization of a probability map against a known point set.

This stands in for network training: instead of learning weights that
produce ``p`` from an image, ``p`` itself is the parameter and is fitted to
one scene by descent on WHD + Huber(count - mass).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleSpecError, NonFiniteLossError
from .geometry import GridSpec
from .whd import WhdEvaluator, WhdParams, huber, huber_derivative

CLAMP = 1e-4
MAX_ATTEMPTS = 100_000

TRACE_COLUMNS = ("iter", "total", "term1", "term2", "reg", "mass")


@dataclass(frozen=True)
class OptimizerConfig:
    iterations: int = 2000
    learning_rate: float | None = None
    seed: int = 0
    use_adam_moments: bool = True
    mass_reg_weight: float = 1.0
    init_value: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.learning_rate is not None and not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError("learning_rate must be positive and finite")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.mass_reg_weight < 0:
            raise ValueError("mass_reg_weight must be >= 0")
        if not 0 < self.init_value < 1:
            raise ValueError("init_value must lie strictly inside (0, 1)")

    @property
    def lr(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 0.01 if self.use_adam_moments else 0.05


@dataclass
class OptimizationTrace:
    iteration: list = field(default_factory=list)
    total: list = field(default_factory=list)
    term1: list = field(default_factory=list)
    term2: list = field(default_factory=list)
    reg: list = field(default_factory=list)
    mass: list = field(default_factory=list)

    def append(self, it, total, term1, term2, reg, mass):
        self.iteration.append(it)
        self.total.append(total)
        self.term1.append(term1)
        self.term2.append(term2)
        self.reg.append(reg)
        self.mass.append(mass)

    def __len__(self):
        return len(self.iteration)

    def rows(self):
        return zip(self.iteration, self.total, self.term1, self.term2, self.reg, self.mass)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for it, *vals in self.rows():
            writer.writerow([it, *(repr(float(v)) for v in vals)])
        return buf.getvalue()


@dataclass
class OptimizationResult:
    """Final map plus the per-iteration trace.

    ``best_map``/``best_loss`` track the lowest objective seen, which is not
    necessarily the last iterate.
    """

    prob_map: np.ndarray
    trace: OptimizationTrace
    best_map: np.ndarray
    best_loss: float
    best_iteration: int

    def __iter__(self):
        # allows ``p, trace = optimize_map(...)``
        return iter((self.prob_map, self.trace))


@dataclass(frozen=True)
class SceneSpec:
    grid: GridSpec
    num_points: int
    min_separation: float = 0.0
    seed: int = 0


def generate_scene(spec: SceneSpec) -> np.ndarray:
    """Rejection-sample ``num_points`` points at least ``min_separation`` apart.

    Points are real-valued and lie strictly inside the grid's coordinate
    bounds.  Deterministic for a given seed.
    """
    if spec.num_points < 1:
        raise InfeasibleSpecError("num_points must be >= 1")
    if spec.min_separation < 0:
        raise InfeasibleSpecError("min_separation must be >= 0")
    grid = spec.grid
    if grid.height < 2 or grid.width < 2:
        raise InfeasibleSpecError("grid must be at least 2x2 to hold interior points")
    rng = np.random.default_rng(spec.seed)
    lo = np.array([0.0, 0.0])
    hi = np.array([grid.height - 1.0, grid.width - 1.0])
    points = []
    attempts = 0
    while len(points) < spec.num_points:
        attempts += 1
        if attempts > MAX_ATTEMPTS:
            raise InfeasibleSpecError(
                f"could not place {spec.num_points} points {spec.min_separation} px apart on {grid} "
                f"after {MAX_ATTEMPTS} attempts"
            )
        cand = rng.uniform(lo, hi)
        if np.any(cand <= lo) or np.any(cand >= hi):
            continue
        if all(math.hypot(*(cand - q)) >= spec.min_separation for q in points):
            points.append(cand)
    return np.array(points)


def _objective(p, evaluator, weight):
    br = evaluator(p, gradient=True)
    residual = evaluator.n_points - br.mass
    reg = huber(residual)
    total = br.total + weight * reg
    # d/dp_x of huber(C - S) is -huber'(C - S) for every pixel
    grad = br.gradient - weight * huber_derivative(residual)
    return total, reg, br, grad


def optimize_map(Y, grid: GridSpec, params: WhdParams = WhdParams(), cfg: OptimizerConfig = OptimizerConfig()):
    """Fit a probability map to ``Y`` by gradient descent (or Adam).

    The count estimate inside the Huber term is the map mass, the only
    differentiable count available without a network.  After every step
    values are clamped to ``[1e-4, 1 - 1e-4]``.

    Each trace row holds the objective *before* the step of that iteration,
    so row 0 is the loss of the initial map.
    """
    evaluator = WhdEvaluator(grid, Y, params)
    p = np.full(grid.shape, cfg.init_value, dtype=np.float64)
    trace = OptimizationTrace()
    best_map, best_loss, best_it = p.copy(), math.inf, -1
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    lr = cfg.lr

    for it in range(cfg.iterations):
        total, reg, br, grad = _objective(p, evaluator, cfg.mass_reg_weight)
        if not (math.isfinite(total) and np.all(np.isfinite(grad))):
            raise NonFiniteLossError(f"non-finite loss at iteration {it}", iteration=it, trace=trace)
        trace.append(it, total, br.term1, br.term2, reg, br.mass)
        if total < best_loss:
            best_map, best_loss, best_it = p.copy(), total, it

        with np.errstate(over="ignore", invalid="ignore"):
            if cfg.use_adam_moments:
                m = cfg.beta1 * m + (1 - cfg.beta1) * grad
                v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad
                m_hat = m / (1 - cfg.beta1 ** (it + 1))
                v_hat = v / (1 - cfg.beta2 ** (it + 1))
                p = p - lr * m_hat / (np.sqrt(v_hat) + 1e-8)
            else:
                p = p - lr * grad
        # clipping would hide an overflowed step, so check before it
        if not np.all(np.isfinite(p)):
            raise NonFiniteLossError(f"non-finite map after step {it}", iteration=it, trace=trace)
        np.clip(p, CLAMP, 1 - CLAMP, out=p)

    return OptimizationResult(p, trace, best_map, best_loss, best_it)
