import numpy as np
import pytest

from hide.attention import (
    SmoothingConfig,
    aggregate_overlay,
    gaussian_smooth,
    minmax_normalize,
    noise_prior,
    purify,
)
from hide.errors import ValidationError
from oracles import dense_gaussian_oracle

# effectively-identity kernel: exp(-0.5/sigma^2) underflows to exactly 0
IDENTITY_SIGMA = 0.01


def test_sigma_must_be_positive():
    with pytest.raises(ValidationError):
        SmoothingConfig(sigma=0.0)
    with pytest.raises(ValidationError):
        SmoothingConfig(sigma=-1.0)


def test_kernel_normalized():
    for sigma in (0.5, 1.0, 2.0, 3.0, 5.5):
        k = SmoothingConfig(sigma=sigma).kernel1d()
        assert abs(k.sum() - 1.0) < 1e-9


def test_radius_rule():
    assert SmoothingConfig(sigma=1.0).radius == 3
    assert SmoothingConfig(sigma=2.0).radius == 6
    assert SmoothingConfig(sigma=2.5).radius == 8


def test_constant_preserved():
    cfg = SmoothingConfig(sigma=3.0)
    for shape in ((1, 1), (2, 2), (4, 9), (16, 3)):
        arr = np.full(shape, 0.37)
        assert np.abs(gaussian_smooth(arr, cfg) - 0.37).max() < 1e-6


def test_impulse_center_weight():
    grid = np.zeros((9, 9))
    grid[4, 4] = 1.0
    out = gaussian_smooth(grid, SmoothingConfig(sigma=1.0))
    assert abs(out[4, 4] - 0.1592) < 1e-3


def test_interior_mass_preserved():
    # support far enough from borders that padding never sees nonzero values
    rng = np.random.default_rng(9)
    cfg = SmoothingConfig(sigma=1.0)
    arr = np.zeros((16, 16))
    arr[7:9, 7:9] = rng.random((2, 2))
    out = gaussian_smooth(arr, cfg)
    assert abs(out.sum() - arr.sum()) < 1e-6


def test_matches_dense_oracle_on_small_grids():
    rng = np.random.default_rng(2024)
    cfg = SmoothingConfig(sigma=1.5)
    for rows in (1, 2, 3, 5, 9, 16):
        for cols in (1, 2, 4, 7, 16):
            arr = rng.random((rows, cols))
            got = gaussian_smooth(arr, cfg)
            want = dense_gaussian_oracle(arr, 1.5)
            assert np.abs(got - want).max() < 1e-6, (rows, cols)


def test_linearity():
    rng = np.random.default_rng(5)
    cfg = SmoothingConfig(sigma=2.0)
    x = rng.random((10, 12))
    y = rng.random((10, 12))
    lhs = gaussian_smooth(2.5 * x - 0.7 * y, cfg)
    rhs = 2.5 * gaussian_smooth(x, cfg) - 0.7 * gaussian_smooth(y, cfg)
    assert np.abs(lhs - rhs).max() < 1e-6


def test_minmax_example():
    out = minmax_normalize(np.array([[1.0, 3.0], [2.0, 5.0]]))
    assert np.array_equal(out, np.array([[0.0, 0.5], [0.25, 1.0]]))


def test_minmax_constant_is_zero():
    assert np.array_equal(minmax_normalize(np.full((3, 3), 7.0)), np.zeros((3, 3)))


def test_minmax_idempotent():
    rng = np.random.default_rng(1)
    for _ in range(20):
        arr = rng.random((6, 6)) * 10 - 3
        once = minmax_normalize(arr)
        assert np.abs(minmax_normalize(once) - once).max() < 1e-12
        assert once.min() == 0.0 and once.max() == 1.0


def test_noise_prior_empty_is_none():
    assert noise_prior([], SmoothingConfig(sigma=1.0)) is None


def test_noise_prior_identical_maps():
    cfg = SmoothingConfig(sigma=1.0)
    m = np.array([[0.0, 0.5], [0.25, 1.0]])
    prior = noise_prior([m, m], cfg)
    expected = minmax_normalize(gaussian_smooth(m, cfg))
    assert np.abs(prior - expected).max() < 1e-12


def test_noise_prior_elementwise_mean():
    cfg = SmoothingConfig(sigma=IDENTITY_SIGMA)
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([[0.0, 0.0], [0.0, 1.0]])
    prior = noise_prior([a, b], cfg)
    assert np.array_equal(prior, np.array([[0.0, 0.5], [0.0, 0.5]]))


def test_noise_prior_shape_mismatch():
    cfg = SmoothingConfig(sigma=1.0)
    with pytest.raises(ValidationError):
        noise_prior([np.zeros((2, 2)), np.zeros((3, 3))], cfg)


def test_purify_self_subtraction_is_zero():
    cfg = SmoothingConfig(sigma=1.0)
    rng = np.random.default_rng(3)
    m = rng.random((8, 8))
    prior = noise_prior([m], cfg)
    assert np.abs(purify(m, prior, cfg)).max() < 1e-6


def test_purify_zero_prior_is_normalize_smooth():
    cfg = SmoothingConfig(sigma=1.0)
    rng = np.random.default_rng(4)
    m = rng.random((6, 6))
    out = purify(m, None, cfg)
    want = minmax_normalize(gaussian_smooth(m, cfg))
    assert np.abs(out - want).max() < 1e-12
    out2 = purify(m, np.zeros((6, 6)), cfg)
    assert np.abs(out2 - want).max() < 1e-12


def test_purify_range_bounds():
    cfg = SmoothingConfig(sigma=1.0)
    rng = np.random.default_rng(6)
    for _ in range(50):
        key = rng.random((8, 8))
        noise = [rng.random((8, 8)) for _ in range(3)]
        out = purify(key, noise_prior(noise, cfg), cfg)
        assert out.min() >= -1.0 - 1e-12 and out.max() <= 1.0 + 1e-12


def test_purify_recovers_blob_from_shared_sink():
    # 8x8 map with a planted 2x2 blob plus a corner sink shared with the
    # noise maps; purification must move the argmax from the sink to the blob
    cfg = SmoothingConfig(sigma=0.5)
    sink = np.zeros((8, 8))
    sink[0, 0] = 1.0
    key = sink.copy()
    key[4:6, 4:6] += 0.5
    noise = [sink.copy(), sink.copy()]

    unpurified = minmax_normalize(gaussian_smooth(key, cfg))
    flat = np.unravel_index(np.argmax(unpurified), unpurified.shape)
    assert flat == (0, 0)

    purified = purify(key, noise_prior(noise, cfg), cfg)
    flat = np.unravel_index(np.argmax(purified), purified.shape)
    assert 4 <= flat[0] < 6 and 4 <= flat[1] < 6


def test_overlay_single_map():
    m = np.array([[0.0, 2.0], [1.0, 4.0]])
    assert np.array_equal(aggregate_overlay([m]), minmax_normalize(m))


def test_overlay_disjoint_regions():
    a = np.zeros((4, 4))
    a[0, 0] = 1.0
    b = np.zeros((4, 4))
    b[3, 3] = 1.0
    out = aggregate_overlay([a, b])
    assert out[0, 0] == 1.0 and out[3, 3] == 1.0


def test_overlay_dominates_inputs():
    rng = np.random.default_rng(8)
    for _ in range(20):
        maps = [rng.random((5, 7)) for _ in range(3)]
        out = aggregate_overlay(maps)
        for m in maps:
            assert (out >= minmax_normalize(m) - 1e-12).all()


def test_overlay_empty_rejected():
    with pytest.raises(ValidationError):
        aggregate_overlay([])
