import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dense_scan_oracle
from sklearn.base import clone

from magsynth.magnifier_kernel import (
    LatentMagnifier,
    LatentOperator,
    ScanParams,
    fuse,
    magnify_pair,
    manipulate,
    pool_features,
    scan_jvp,
    selective_scan_1d,
    selective_scan_2d,
    static_refine,
    upsample_features,
)

ZERO = LatentOperator("zero")
RANDOM = LatentOperator("random", seed=3)


def _feat(rng, shape=(8, 16, 16)):
    return rng.standard_normal(shape)


def test_manipulate_identity_unit_alpha(rng):
    fa, fb = _feat(rng), _feat(rng)
    assert np.array_equal(manipulate(fa, fb, 1.0), fb)


def test_manipulate_zero_differential(rng):
    fa = _feat(rng)
    assert np.array_equal(manipulate(fa, fa, 7.0, ZERO), fa)
    assert np.array_equal(manipulate(fa, fa.copy(), 7.0, RANDOM), fa)


def test_manipulate_scalar_arithmetic():
    out = manipulate(np.ones((1, 1, 1)), np.full((1, 1, 1), 1.2), 10.0)
    assert out[0, 0, 0] == pytest.approx(3.0, abs=1e-12)


def test_manipulate_affine_in_alpha(rng):
    fa, fb = _feat(rng), _feat(rng)
    for alpha in (0.0, 0.5, 2.0, 30.0):
        assert np.allclose(manipulate(fa, fb, alpha), fa + alpha * (fb - fa), atol=1e-12)


def test_manipulate_general_operator(rng):
    fa, fb = _feat(rng), _feat(rng)
    assert np.array_equal(manipulate(fa, fb, 3.0, RANDOM), fa + RANDOM(3.0 * (fb - fa)))


def test_static_refine_examples(rng):
    fah, fbh = _feat(rng), _feat(rng)
    assert np.array_equal(static_refine(fah, fah.copy(), RANDOM), fah)
    assert np.array_equal(static_refine(fah, fbh, "identity"), fbh)
    assert np.array_equal(static_refine(fah, fbh, ZERO), fah)
    assert np.array_equal(static_refine(fah, fbh, RANDOM), fah - RANDOM(fah - fbh))


def test_fuse_examples(rng):
    zu, fsr = _feat(rng), _feat(rng)
    assert np.array_equal(fuse(zu, fsr), zu + fsr)
    assert np.array_equal(fuse(np.zeros_like(fsr), fsr), fsr)
    assert np.array_equal(fuse(zu, fsr, RANDOM), RANDOM(zu + fsr))


def test_shape_mismatch_errors(rng):
    a, b = _feat(rng), _feat(rng, (8, 16, 15))
    for op in (manipulate,):
        with pytest.raises(ValueError):
            op(a, b, 2.0)
    with pytest.raises(ValueError):
        static_refine(a, b)
    with pytest.raises(ValueError):
        fuse(a, b)
    with pytest.raises(ValueError):
        manipulate(a[0], b[0], 2.0)


def test_operator_validation():
    with pytest.raises(ValueError):
        LatentOperator("conv")
    with pytest.raises(TypeError):
        manipulate(np.zeros((1, 1, 1)), np.zeros((1, 1, 1)), 1.0, 3)
    f = np.zeros((4, 2, 2))
    for kind in ("identity", "zero", "random"):
        assert np.array_equal(LatentOperator(kind)(f), f)


def test_scan_memoryless_limit(rng):
    p = ScanParams.random(3, 4, seed=2)
    p = ScanParams(np.full((3, 4), -1e6), p.W_delta, p.b_delta, p.W_B, p.b_B, p.W_C, p.b_C)
    x = rng.standard_normal((10, 3))
    delta = np.logaddexp(0.0, x @ p.W_delta + p.b_delta)
    b = x @ p.W_B + p.b_B
    c = x @ p.W_C + p.b_C
    expected = delta * x * (b * c).sum(axis=1, keepdims=True)
    assert np.allclose(selective_scan_1d(x, p), expected, rtol=1e-12, atol=1e-12)


def test_scan_single_step(rng):
    p = ScanParams.random(5, 3, seed=4)
    x = rng.standard_normal((1, 5))
    delta = np.logaddexp(0.0, x @ p.W_delta + p.b_delta)
    b = x @ p.W_B + p.b_B
    c = x @ p.W_C + p.b_C
    expected = delta * x * (b * c).sum()
    assert np.allclose(selective_scan_1d(x, p), expected, atol=1e-14)


def test_scan_dense_oracle_reference_instance():
    rng = np.random.default_rng(11)
    p = ScanParams.random(3, 4, seed=11)
    x = rng.standard_normal((16, 3))
    assert np.max(np.abs(selective_scan_1d(x, p) - dense_scan_oracle(x, p))) < 1e-10


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), length=st.integers(1, 64), d=st.integers(1, 3))
def test_scan_dense_oracle_random(seed, n, length, d):
    rng = np.random.default_rng(seed)
    p = ScanParams.random(d, n, seed=seed)
    x = rng.standard_normal((length, d))
    assert np.max(np.abs(selective_scan_1d(x, p) - dense_scan_oracle(x, p))) < 1e-10


def test_scan_rejects_bad_input():
    p = ScanParams.random(2, 2)
    with pytest.raises(ValueError):
        selective_scan_1d(np.zeros((0, 2)), p)
    with pytest.raises(ValueError):
        selective_scan_1d(np.full((3, 2), np.nan), p)
    with pytest.raises(ValueError):
        ScanParams(np.full((2, 2), np.inf), p.W_delta, p.b_delta, p.W_B, p.b_B, p.W_C, p.b_C)
    with pytest.raises(ValueError):
        ScanParams(p.A, p.W_delta, p.b_delta, p.W_B, p.b_B, p.W_C, np.zeros(3))


def test_scan2d_single_pixel(rng):
    p = ScanParams.random(4, 3, seed=1)
    f = rng.standard_normal((4, 1, 1))
    expected = selective_scan_1d(f.reshape(4, 1).T, p).T.reshape(4, 1, 1)
    assert np.allclose(selective_scan_2d(f, p), expected, atol=1e-15)


def test_scan2d_transpose_symmetry(rng):
    p = ScanParams.random(3, 4, seed=6)
    f = rng.standard_normal((3, 5, 7))
    out = selective_scan_2d(f, p)
    assert out.shape == f.shape
    out_t = selective_scan_2d(f.transpose(0, 2, 1), p)
    assert np.allclose(out_t, out.transpose(0, 2, 1), rtol=0, atol=1e-12)


def _random_tangent(rng, p):
    return p.map(lambda a: rng.standard_normal(a.shape))


def test_jvp_zero_direction(rng):
    p = ScanParams.random(3, 4, seed=0)
    x = rng.standard_normal((12, 3))
    zero = p.map(np.zeros_like)
    assert np.array_equal(scan_jvp(x, p, np.zeros_like(x), zero), np.zeros_like(x))


@pytest.mark.parametrize("seed", range(10))
def test_jvp_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = ScanParams.random(3, 4, seed=seed)
    x = rng.standard_normal((20, 3))
    dx = rng.standard_normal(x.shape)
    dp = _random_tangent(rng, p)
    eps = 1e-5
    plus = selective_scan_1d(x + eps * dx, p.map(lambda a, t: a + eps * t, dp))
    minus = selective_scan_1d(x - eps * dx, p.map(lambda a, t: a - eps * t, dp))
    fd = (plus - minus) / (2 * eps)
    jvp = scan_jvp(x, p, dx, dp)
    assert np.linalg.norm(jvp - fd) / np.linalg.norm(fd) < 1e-4


def test_jvp_frozen_gate_linearity(rng):
    p = ScanParams.random(3, 4, seed=8)
    frozen = ScanParams(p.A, np.zeros_like(p.W_delta), p.b_delta, np.zeros_like(p.W_B), p.b_B,
                        np.zeros_like(p.W_C), p.b_C)
    x = rng.standard_normal((15, 3))
    dx = rng.standard_normal(x.shape)
    jvp = scan_jvp(x, frozen, dx, frozen.map(np.zeros_like))
    assert np.allclose(jvp, selective_scan_1d(dx, frozen), atol=1e-12)


def test_pool_and_upsample(rng):
    f = rng.standard_normal((2, 8, 8))
    assert np.array_equal(pool_features(f, 1), f)
    pooled = pool_features(f, 4)
    assert pooled.shape == (2, 2, 2)
    assert pooled[0, 0, 0] == pytest.approx(f[0, :4, :4].mean())
    assert upsample_features(pooled, 4, (8, 8)).shape == (2, 8, 8)
    assert pool_features(rng.standard_normal((1, 5, 6)), 4).shape == (1, 2, 2)


def test_magnify_pair_collapses(rng):
    a, b = rng.random((9, 10, 3)), rng.random((9, 10, 3))
    assert np.array_equal(magnify_pair(a, b, 1.0), b)
    assert np.array_equal(magnify_pair(a, b, 0.0), a)
    assert np.allclose(magnify_pair(a, b, 3.0), a + 3.0 * (b - a), atol=1e-12)


def test_magnify_pair_downsampled_branch(rng):
    a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
    # Identity refinement hands back B's detail; only the coarse part is magnified.
    out = magnify_pair(a, b, 1.0, down_factor=4)
    assert np.allclose(out, b, atol=1e-12)
    out = magnify_pair(a, a, 5.0, down_factor=2, scan=None)
    assert np.allclose(out, a, atol=1e-12)


def test_latent_magnifier_api(rng):
    est = LatentMagnifier(alpha=4.0)
    assert est.get_params()["alpha"] == 4.0
    assert clone(est).get_params() == est.get_params()
    pair = rng.random((2, 6, 6, 3))
    out = est.fit_transform(pair)
    assert out.shape == (6, 6, 3)
    assert np.allclose(out, pair[0] + 4.0 * (pair[1] - pair[0]))
    batch = rng.random((3, 2, 6, 6, 3))
    assert est.transform(batch).shape == (3, 6, 6, 3)
    scanned = LatentMagnifier(alpha=2.0, scan_seed=1).fit(pair)
    assert scanned.scan_params_.channels == 3
    assert scanned.transform(pair).shape == (6, 6, 3)


def test_latent_magnifier_validation(rng):
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        LatentMagnifier().transform(rng.random((2, 4, 4, 3)))
    with pytest.raises(ValueError):
        LatentMagnifier().fit(rng.random((3, 4, 4, 3)))
    with pytest.raises(ValueError):
        LatentMagnifier(down_factor=0).fit(rng.random((2, 4, 4, 3)))
