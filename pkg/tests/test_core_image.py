import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magsynth import core_image as ci


def _img(v, h=4, w=5):
    return np.full((h, w, 3), v, dtype=np.float64)


# -- sRGB transfer -----------------------------------------------------------


def test_srgb_fixed_points():
    assert ci.srgb_to_linear(_img(0.0)).max() == 0.0
    assert np.all(ci.srgb_to_linear(_img(1.0)) == 1.0)
    assert np.all(ci.linear_to_srgb(_img(0.0)) == 0.0)


def test_srgb_midpoint_matches_high_precision():
    mpmath.mp.dps = 40
    expected = float(((mpmath.mpf("0.5") + mpmath.mpf("0.055")) / mpmath.mpf("1.055")) ** mpmath.mpf("2.4"))
    got = ci.srgb_to_linear(_img(0.5))[0, 0, 0]
    assert abs(got - expected) < 1e-15


def test_srgb_round_trip_dense_grid():
    x = np.linspace(0.0, 1.0, 30001).reshape(-1, 1, 1).repeat(3, axis=2)
    back = ci.srgb_to_linear(ci.linear_to_srgb(x))
    assert np.max(np.abs(back - x)) < 1e-6
    for v in (0.1, 0.5, 0.9):
        assert abs(ci.linear_to_srgb(ci.srgb_to_linear(_img(v)))[0, 0, 0] - v) < 1e-6


def test_linear_to_srgb_clips_out_of_range():
    assert np.all(ci.linear_to_srgb(_img(2.0)) == 1.0)
    assert np.all(ci.linear_to_srgb(_img(-0.5)) == 0.0)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_transfer_rejects_non_finite(bad):
    img = _img(0.5)
    img[1, 1, 1] = bad
    with pytest.raises(ValueError):
        ci.srgb_to_linear(img)
    with pytest.raises(ValueError):
        ci.linear_to_srgb(img)


# -- Lanczos -----------------------------------------------------------------


def _lanczos_oracle(src_1d, n_out):
    """Direct kernel sum per output site with reflection and renormalization.

    Downscaling stretches the kernel by 1/scale (anti-aliasing).
    """
    n_in = len(src_1d)
    scale = n_out / n_in
    stretch = min(scale, 1.0)
    out = []
    for i in range(n_out):
        u = (i + 0.5) / scale - 0.5
        num = den = 0.0
        for k in range(-20, n_in + 20):
            x = (u - k) * stretch
            if abs(x) >= 3:
                continue
            w = 1.0 if x == 0 else 3 * math.sin(math.pi * x) * math.sin(math.pi * x / 3) / (math.pi * x) ** 2
            kk = k % (2 * n_in)
            kk = 2 * n_in - 1 - kk if kk >= n_in else kk
            num += w * src_1d[kk]
            den += w
        out.append(num / den)
    return np.array(out)


def test_lanczos_constant_preserved():
    out = ci.resample_lanczos(_img(0.5, 10, 13), 2)
    assert out.shape == (20, 26, 3)
    assert np.max(np.abs(out - 0.5)) < 1e-6


def test_lanczos_scale_one_identity(rng):
    img = rng.random((11, 7, 3))
    assert np.max(np.abs(ci.resample_lanczos(img, 1) - img)) < 1e-6


def test_lanczos_delta_matches_direct_kernel_sum():
    img = np.zeros((12, 14, 3))
    img[5, 7, :] = 1.0
    out = ci.resample_lanczos(img, 2)
    col = _lanczos_oracle(img[:, 7, 0], 24)
    row = _lanczos_oracle(img[5, :, 0], 28)
    # Separable: the delta response is the outer product of the 1-D responses.
    expected = np.outer(col, row)
    assert np.max(np.abs(out[..., 0] - expected)) < 1e-12


def test_lanczos_downscale_matches_oracle(rng):
    src = rng.random(20)
    img = np.repeat(src[None, :, None], 3, axis=2)
    out = ci.resample_to(img, 1, 8)
    assert np.max(np.abs(out[0, :, 0] - _lanczos_oracle(src, 8))) < 1e-12


def test_lanczos_degenerate_size():
    with pytest.raises(ValueError):
        ci.resample_lanczos(_img(0.5, 10, 10), 0.01)
    with pytest.raises(ValueError):
        ci.resample_lanczos(_img(0.5), 0)


# -- Gaussian blur -----------------------------------------------------------


def test_blur_sigma_zero_identity(rng):
    img = rng.random((6, 6, 3))
    assert np.array_equal(ci.gaussian_blur(img, 0), img)


def test_blur_constant():
    assert np.max(np.abs(ci.gaussian_blur(_img(0.3, 9, 9), 1.7) - 0.3)) < 1e-15


def test_blur_impulse_taps():
    img = np.zeros((1, 21, 3))
    img[0, 10] = 1.0
    out = ci.gaussian_blur(img, 1.0)[0, :, 0]
    k = np.arange(-3, 4)
    taps = np.exp(-(k**2) / 2.0)
    taps /= taps.sum()
    expected = np.zeros(21)
    expected[7:14] = taps
    assert np.max(np.abs(out - expected)) < 1e-15


@settings(max_examples=30, deadline=None)
@given(sigma=st.floats(0.1, 6.0), seed=st.integers(0, 10_000))
def test_blur_preserves_mean(sigma, seed):
    img = np.random.default_rng(seed).random((17, 23, 3))
    assert abs(ci.gaussian_blur(img, sigma).mean() - img.mean()) < 1e-5


# -- quantization ------------------------------------------------------------


def test_quantize_examples():
    assert ci.quantize(_img(0.0))[0, 0, 0] == 0
    assert ci.quantize(_img(1.0))[0, 0, 0] == 255
    assert ci.quantize(_img(0.5))[0, 0, 0] == 128


def test_quantize_idempotent(rng):
    x = rng.random((10, 100, 3))
    q = ci.quantize(x)
    assert np.array_equal(ci.quantize(ci.dequantize(q)), q)


def test_quantize_monotone(rng):
    x = np.sort(rng.random(5000)).reshape(1, -1, 1).repeat(3, axis=2)
    codes = ci.quantize(x)[0, :, 0].astype(int)
    assert np.all(np.diff(codes) >= 0)


# -- PNG ---------------------------------------------------------------------


def test_png_round_trip(tmp_path, rng):
    codes = rng.integers(0, 256, (7, 9, 3)).astype(np.uint8)
    ci.write_png(tmp_path / "a.png", codes)
    assert np.array_equal(ci.read_codes(tmp_path / "a.png"), codes)
    assert np.allclose(ci.read_png(tmp_path / "a.png"), codes / 255.0)


def test_png16_round_trip(tmp_path, rng):
    import png

    vals = rng.random((5, 6, 3))
    ci.write_png16(tmp_path / "b.png", vals)
    w, h, rows, info = png.Reader(filename=str(tmp_path / "b.png")).read()
    assert info["bitdepth"] == 16 and (w, h) == (6, 5)
    got = np.array([list(r) for r in rows], dtype=np.float64).reshape(5, 6, 3) / 65535.0
    assert np.max(np.abs(got - vals)) <= 0.5 / 65535.0 + 1e-12
