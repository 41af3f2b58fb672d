"""Weighted Hausdorff distance loss for locating objects as points.

Submodules: ``geometry`` (set distances), ``whd`` (loss and gradient),
``optimizer`` (direct map fitting and synthetic scenes), ``postprocess``
(thresholding, counting, Gaussian-mixture localization), ``metrics`` and
``io``/``cli``.
"""

from .errors import WHDError
from .geometry import GridSpec, Point, avg_hausdorff, d_max, euclidean, hausdorff, min_dist_field
from .metrics import count_metrics, evaluate, f_vs_r_sweep, match_at_radius, precision_recall_f
from .optimizer import OptimizerConfig, SceneSpec, generate_scene, optimize_map
from .postprocess import ThresholdMethod, bmm_threshold, fit_beta_mixture, fit_gmm, localize, otsu_threshold
from .whd import ScaleTransform, WhdParams, combined_loss, generalized_mean, huber, whd, whd_gradient

__version__ = "0.1.0"
