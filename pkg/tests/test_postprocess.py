import numpy as np
import pytest
from scipy import stats

from whdloc.errors import (
    DegenerateFitError,
    DegenerateMapError,
    InsufficientDataError,
    MaskCountMismatchError,
    TooFewPointsError,
)
from whdloc.postprocess import (
    OTSU_BINS,
    ThresholdMethod,
    bmm_threshold,
    bmm_threshold_info,
    estimate_count,
    fit_beta_mixture,
    fit_gmm,
    localize,
    otsu_threshold,
)


def otsu_exhaustive(p):
    """Try every interior bin edge and score the split directly."""
    v = np.asarray(p, dtype=float).ravel()
    idx = np.minimum((v * OTSU_BINS).astype(int), OTSU_BINS - 1)
    centers = (idx + 0.5) / OTSU_BINS
    best_k, best = None, -np.inf
    for k in range(1, OTSU_BINS):
        lo, hi = centers[idx < k], centers[idx >= k]
        if lo.size == 0 or hi.size == 0:
            continue
        score = (lo.size / v.size) * (hi.size / v.size) * (hi.mean() - lo.mean()) ** 2
        if score > best * (1 + 1e-12):
            best_k, best = k, score
    return best_k / OTSU_BINS


def between_class_variance(p, tau):
    v = np.ravel(p)
    lo, hi = v[v <= tau], v[v > tau]
    return lo.size * hi.size / v.size**2 * (hi.mean() - lo.mean()) ** 2


# -- Otsu ------------------------------------------------------------------------

def test_otsu_two_clusters():
    p = np.array([0.1, 0.9] * 50).reshape(10, 10)
    tau = otsu_threshold(p)
    assert 0.1 < tau < 0.9
    assert tau == otsu_exhaustive(p)


def test_otsu_two_deltas():
    p = np.array([[0.0, 1.0], [1.0, 0.0]])
    tau = otsu_threshold(p)
    assert np.array_equal(p > tau, p == 1.0)


def test_otsu_random_bimodal(rng):
    for _ in range(10):
        n = 400
        v = np.concatenate([rng.normal(0.25, 0.08, n // 2), rng.normal(0.7, 0.1, n // 2)])
        p = np.clip(v, 0, 1).reshape(20, 20)
        tau = otsu_threshold(p)
        assert tau == otsu_exhaustive(p)
        best = between_class_variance(p, tau)
        edges = np.arange(1, OTSU_BINS) / OTSU_BINS
        others = []
        for e in edges:
            if (p <= e).any() and (p > e).any():
                others.append(between_class_variance(p, e))
        # raw-value variance differs slightly from the binned one
        assert best >= max(others) - 1e-4


def test_otsu_constant_map():
    with pytest.raises(DegenerateMapError):
        otsu_threshold(np.full((4, 4), 0.3))


# -- Beta mixture ------------------------------------------------------------------

def beta_mixture_sample(rng, n=5000):
    z = rng.random(n) < 0.5
    return np.where(z, rng.beta(2, 20, n), rng.beta(20, 2, n))


def test_beta_mixture_recovers_generator(rng):
    mix = fit_beta_mixture(beta_mixture_sample(rng))
    means = np.sort(mix.means)
    assert means[0] == pytest.approx(2 / 22, abs=0.05)
    assert means[1] == pytest.approx(20 / 22, abs=0.05)
    assert mix.weights.sum() == pytest.approx(1, abs=1e-9)
    assert np.all(mix.a > 0) and np.all(mix.b > 0)


def test_beta_mixture_likelihood_monotone(rng):
    for x in (beta_mixture_sample(rng), rng.beta(0.5, 3, 2000), np.concatenate([rng.beta(1, 30, 900), rng.beta(5, 5, 100)])):
        ll = np.array(fit_beta_mixture(x).log_likelihood)
        assert np.all(np.diff(ll) >= -1e-8)


def test_beta_mixture_mirror_symmetry(rng):
    x = rng.beta(2, 9, 1000)
    x = np.concatenate([x, 1 - x])
    mix = fit_beta_mixture(x)
    lo, hi = np.argsort(mix.means)
    assert mix.a[lo] == pytest.approx(mix.b[hi], rel=1e-3)
    assert mix.b[lo] == pytest.approx(mix.a[hi], rel=1e-3)
    assert mix.weights[lo] == pytest.approx(mix.weights[hi], abs=1e-3)


def test_beta_mixture_degenerate_inputs(rng):
    with pytest.raises(InsufficientDataError):
        fit_beta_mixture([0.2, 0.8])
    with pytest.raises(DegenerateFitError):
        fit_beta_mixture(np.full(100, 0.5))
    narrow = 0.5 + rng.normal(0, 1e-6, 500)
    try:
        mix = fit_beta_mixture(narrow)
    except DegenerateFitError:
        pass
    else:
        assert abs(mix.means[0] - mix.means[1]) < 0.01
    # either way the threshold falls back
    info = bmm_threshold_info(narrow.reshape(20, 25))
    assert info.fallback_used


def test_beta_mixture_likelihood_matches_scipy(rng):
    x = beta_mixture_sample(rng, 300)
    mix = fit_beta_mixture(x)
    xc = np.clip(x, 1e-4, 1 - 1e-4)
    dens = sum(w * stats.beta(a, b).pdf(xc) for a, b, w in zip(mix.a, mix.b, mix.weights))
    assert mix.score(x) == pytest.approx(np.log(dens).sum(), rel=1e-9)


def test_bmm_threshold_high_component(rng):
    p = beta_mixture_sample(rng).reshape(50, 100)
    assert bmm_threshold(p) == pytest.approx(20 / 22, abs=0.05)


def test_bmm_threshold_sparse_map(rng):
    p = rng.beta(1, 40, (32, 32))
    p[rng.integers(0, 32, 12), rng.integers(0, 32, 12)] = rng.uniform(0.85, 0.99, 12)
    info = bmm_threshold_info(p)
    assert not info.fallback_used
    assert info.tau > 0.5


def test_bmm_uniform_map_falls_back():
    info = bmm_threshold_info(np.full((8, 8), 0.1))
    assert info.fallback_used
    assert not (np.full((8, 8), 0.1) > info.tau).any()


def test_bmm_saturated_map_falls_back_to_otsu():
    p = np.full((16, 16), 1e-4)
    p[3, 4] = p[10, 12] = 1 - 1e-4
    info = bmm_threshold_info(p)
    assert info.fallback_used and info.tau == otsu_threshold(p)
    assert np.array_equal(p > info.tau, p > 0.5)


# -- counting ------------------------------------------------------------------------

def test_estimate_count():
    m = np.zeros((10, 10), bool)
    assert estimate_count(m.astype(float), m) == 0
    m[0:3, 0:3] = True
    m[5:8, 5:8] = True
    assert estimate_count(m.astype(float), m) == 2
    m2 = np.zeros((6, 6), bool)
    m2[0:2, 0:2] = True
    m2[2:4, 2:4] = True  # touches only at a corner
    assert estimate_count(m2.astype(float), m2) == 1


# -- Gaussian mixture ------------------------------------------------------------------

def test_gmm_two_gaussians(rng):
    a = rng.normal([10, 10], 1.0, (200, 2))
    b = rng.normal([10, 30], 1.0, (200, 2))
    gmm = fit_gmm(np.vstack([a, b]), 2, seed=3)
    means = gmm.means[np.argsort(gmm.means[:, 1])]
    np.testing.assert_allclose(means, [[10, 10], [10, 30]], atol=0.5)
    assert gmm.weights.sum() == pytest.approx(1, abs=1e-9)
    assert np.all(np.diff(gmm.log_likelihood) >= -1e-8)
    for c in gmm.covariances:
        assert np.allclose(c, c.T) and np.linalg.eigvalsh(c).min() >= 1e-6 * (1 - 1e-9)


def test_gmm_single_component_is_centroid(rng):
    X = rng.uniform(0, 20, (37, 2))
    gmm = fit_gmm(X, 1)
    np.testing.assert_allclose(gmm.means[0], X.mean(axis=0), rtol=0, atol=1e-12)


def test_gmm_saturated(rng):
    X = rng.uniform(0, 20, (6, 2))
    gmm = fit_gmm(X, 6, seed=1)
    d = np.linalg.norm(gmm.means[:, None] - X[None], axis=2)
    assert sorted(d.argmin(axis=1)) == list(range(6))
    assert d.min(axis=1).max() <= 1e-3


def test_gmm_errors_and_determinism(rng):
    with pytest.raises(TooFewPointsError):
        fit_gmm([(0, 0)], 2)
    X = rng.normal(0, 3, (80, 2))
    assert np.array_equal(fit_gmm(X, 3, seed=5).means, fit_gmm(X, 3, seed=5).means)


def test_gmm_likelihood_monotone_on_blobs(rng):
    X = np.vstack([rng.normal(c, 1.5, (30, 2)) for c in ([0, 0], [6, 1], [2, 9])])
    for seed in range(5):
        assert np.all(np.diff(fit_gmm(X, 3, seed=seed).log_likelihood) >= -1e-8)


# -- localize --------------------------------------------------------------------------

def test_localize_one_hot():
    p = np.zeros((12, 12))
    hot = [(2, 3), (7, 9), (10, 1)]
    for r, c in hot:
        p[r, c] = 1
    res = localize(p, ThresholdMethod.fixed(0.5))
    assert res.count_estimate == 3
    assert sorted(map(tuple, res.locations)) == sorted(hot)
    assert np.array_equal(res.mask, p > 0.5)


def test_localize_count_override_splits_blob():
    p = np.zeros((20, 20))
    p[8:12, 6:14] = 0.9
    res = localize(p, ThresholdMethod.fixed(0.5), count_override=2)
    assert len(res.locations) == 2
    for r, c in res.locations:
        assert 8 <= r <= 11 and 6 <= c <= 13
    assert not np.allclose(res.locations[0], res.locations[1])


def test_localize_empty_and_mismatch():
    p = np.full((6, 6), 0.2)
    res = localize(p, ThresholdMethod.fixed(0.5))
    assert res.count_estimate == 0 and res.locations.shape == (0, 2)
    with pytest.raises(MaskCountMismatchError):
        localize(p, ThresholdMethod.fixed(0.5), count_override=1)


def test_localize_deterministic_and_in_bounds(rng):
    p = rng.beta(1, 30, (24, 24))
    p[4:7, 4:7] = 0.95
    p[15:18, 10:12] = 0.9
    a = localize(p, ThresholdMethod("bmm"), seed=2)
    b = localize(p, ThresholdMethod("bmm"), seed=2)
    assert np.array_equal(a.locations, b.locations)
    assert np.all((a.locations >= 0) & (a.locations <= 23))
    assert a.count_estimate == len(a.locations)


def test_threshold_method_parse():
    assert ThresholdMethod.parse("fixed:0.3") == ThresholdMethod.fixed(0.3)
    assert ThresholdMethod.parse("BMM").kind == "bmm"
    for bad in ("fixed:2", "fixed:x", "median"):
        with pytest.raises(ValueError):
            ThresholdMethod.parse(bad)
