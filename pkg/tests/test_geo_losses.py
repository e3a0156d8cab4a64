import warnings

import numpy as np
import pytest
from conftest import central_difference, relative_error
from hypothesis import given, settings
from hypothesis import strategies as st

from vita.dense_maps import DimensionMismatchError
from vita.geo_losses import (
    GeoLossWeights,
    SingularAlignmentWarning,
    align_least_squares,
    perturb_teacher,
    smooth_l1,
    smooth_l1_geo,
    ssi_loss,
)


def test_weights_defaults_and_validation():
    w = GeoLossWeights()
    assert (w.lambda_slope, w.lambda_elev, w.lambda_geo) == (1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        GeoLossWeights(lambda_slope=-1.0)


def test_smooth_l1_examples():
    g = np.full((3, 3), 0.2)
    loss, grads = smooth_l1_geo({"slope": g, "elev": g}, {"slope": g, "elev": g})
    assert loss == 0.0 and np.all(grads["slope"] == 0)
    loss, _ = smooth_l1_geo({"slope": g + 0.5, "elev": g}, {"slope": g, "elev": g})
    assert loss == pytest.approx(0.125, abs=1e-15)
    loss, _ = smooth_l1(np.full((2, 2), 3.0), np.full((2, 2), 1.0))
    assert loss == pytest.approx(1.5)


def test_smooth_l1_geo_weights_and_shapes(rng):
    p = {"slope": rng.random((3, 3)), "elev": rng.random((3, 3))}
    t = {"slope": rng.random((3, 3)), "elev": rng.random((3, 3))}
    a = smooth_l1(p["slope"], t["slope"])[0]
    b = smooth_l1(p["elev"], t["elev"])[0]
    loss, _ = smooth_l1_geo(p, t, GeoLossWeights(0.5, 2.0))
    assert loss == pytest.approx(0.5 * a + 2.0 * b, rel=1e-15)
    with pytest.raises(DimensionMismatchError):
        smooth_l1_geo({"slope": np.zeros((2, 2)), "elev": np.zeros((2, 2))}, {"slope": np.zeros((2, 3)), "elev": np.zeros((2, 2))})


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_smooth_l1_geo_gradient(seed):
    r = np.random.default_rng(seed)
    t = {"slope": r.random((3, 3)), "elev": r.random((3, 3))}
    p = {"slope": r.normal(scale=1.5, size=(3, 3)), "elev": r.normal(scale=1.5, size=(3, 3))}
    w = GeoLossWeights(r.uniform(0.1, 2), r.uniform(0.1, 2))
    _, g = smooth_l1_geo(p, t, w)
    for name in ("slope", "elev"):
        # skip points that sit on the Huber kink
        if np.min(np.abs(np.abs(p[name] - t[name]) - 1.0)) < 1e-4:
            continue

        def f(x, name=name):
            return smooth_l1_geo({**p, name: x}, t, w)[0]

        assert relative_error(g[name], central_difference(f, p[name])) < 1e-6


def test_alignment_exact_affine(rng):
    x = rng.random((5, 5))
    fit = align_least_squares(x, 2 * x + 3)
    assert fit.scale == pytest.approx(2.0, abs=1e-12) and fit.shift == pytest.approx(3.0, abs=1e-12)
    assert not fit.singular
    fit = align_least_squares(x, x)
    assert fit.scale == pytest.approx(1.0, abs=1e-12) and fit.shift == pytest.approx(0.0, abs=1e-12)


def _grid_search(x, y):
    """Zooming grid search over (s, t); independent of the normal equations."""
    s0, t0, span_s, span_t = 0.0, 0.0, 20.0, 20.0
    best = None
    for _ in range(40):
        ss = s0 + np.linspace(-span_s, span_s, 41)
        ts = t0 + np.linspace(-span_t, span_t, 41)
        obj = ((ss[:, None, None] * x[None, None, :] + ts[None, :, None] - y[None, None, :]) ** 2).sum(-1)
        i, j = np.unravel_index(np.argmin(obj), obj.shape)
        s0, t0, best = ss[i], ts[j], obj[i, j]
        span_s, span_t = span_s / 4, span_t / 4
    return best


@pytest.mark.parametrize("seed", range(5))
def test_alignment_matches_grid_search(seed):
    r = np.random.default_rng(seed)
    x = r.random((8, 8))
    y = r.uniform(-2, 2) * x + r.uniform(-3, 3) + 0.3 * r.normal(size=(8, 8))
    fit = align_least_squares(x, y)
    closed = float(((fit.scale * x + fit.shift - y) ** 2).sum())
    grid = _grid_search(x.ravel(), y.ravel())
    assert closed <= grid + 1e-12
    assert grid - closed < 1e-6


def test_singular_alignment_falls_back():
    x = np.full((3, 3), 2.0)
    y = np.arange(9.0).reshape(3, 3)
    with pytest.warns(SingularAlignmentWarning):
        fit = align_least_squares(x, y)
    assert fit.singular and fit.scale == 1.0 and fit.shift == pytest.approx(y.mean() - 2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularAlignmentWarning)
        loss, grad = ssi_loss(x, y)
    assert np.isfinite(loss) and np.all(np.isfinite(grad))


@settings(max_examples=50, deadline=None)
@given(a=st.floats(1e-3, 1e3), c=st.floats(-1e3, 1e3), seed=st.integers(0, 2**32 - 1))
def test_ssi_scale_shift_invariance(a, c, seed):
    d = 1.0 + np.random.default_rng(seed).random((6, 6))
    assert ssi_loss(a * d + c, d)[0] < 1e-9


def test_ssi_alternating_residual():
    v, u = np.mgrid[0:6, 0:6].astype(float)
    pred = 10.0 + v  # orthogonal to the checkerboard on an even-sized map
    pattern = np.where((u + v) % 2 == 0, 1.0, -1.0)
    fit = align_least_squares(pred, pred + pattern)
    assert fit.scale == pytest.approx(1.0, abs=1e-12) and fit.shift == pytest.approx(0.0, abs=1e-10)
    assert ssi_loss(pred, pred + pattern)[0] == pytest.approx(1.0, abs=1e-12)


def test_ssi_common_transform(rng):
    pred, teacher = 1 + rng.random((5, 5)), 1 + rng.random((5, 5))
    base = ssi_loss(pred, teacher)[0]
    # a common shift leaves the loss unchanged; a common scale multiplies it
    assert ssi_loss(pred + 7.0, teacher + 7.0)[0] == pytest.approx(base, rel=1e-10)
    assert ssi_loss(3.0 * pred, 3.0 * teacher)[0] == pytest.approx(3.0 * base, rel=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_ssi_gradient_random(seed):
    r = np.random.default_rng(seed)
    pred, teacher = r.random((6, 6)), 2 + r.random((6, 6))
    loss, grad = ssi_loss(pred, teacher)
    fd = central_difference(lambda x: ssi_loss(x, teacher)[0], pred, step=1e-6)
    assert loss >= 0
    assert relative_error(grad, fd) < 1e-4


def test_perturb_teacher(rng):
    d = 1 + rng.random((4, 4))
    assert np.array_equal(perturb_teacher(d, 0.0, rng), d)
    noisy = perturb_teacher(d, 0.1, np.random.default_rng(0))
    assert np.array_equal(noisy, perturb_teacher(d, 0.1, np.random.default_rng(0)))
    assert np.all(noisy > 0) and not np.array_equal(noisy, d)
