"""Color transfer, resampling and raster primitives.

Linear-light rasters are float64 arrays of shape (H, W, 3). sRGB-encoded
rasters use the same layout with values in [0, 1]. Quantized rasters are
uint8 arrays of 8-bit codes.
"""

import math

import numpy as np
import png
from PIL import Image
from scipy import ndimage

from ._validation import check_codes, check_image

LANCZOS_ORDER = 3

# IEC 61966-2-1 breakpoints
_SRGB_DECODE_KNEE = 0.04045
_SRGB_ENCODE_KNEE = 0.0031308


def srgb_to_linear(img):
    """Apply the sRGB electro-optical transfer function per channel."""
    x = np.clip(check_image(img, "img"), 0.0, 1.0)
    return np.where(
        x <= _SRGB_DECODE_KNEE,
        x / 12.92,
        ((x + 0.055) / 1.055) ** 2.4,
    )


def linear_to_srgb(img):
    """Encode linear light to sRGB. Input is clipped to [0, 1] first."""
    x = np.clip(check_image(img, "img"), 0.0, 1.0)
    out = np.where(
        x <= _SRGB_ENCODE_KNEE,
        12.92 * x,
        1.055 * np.power(x, 1.0 / 2.4) - 0.055,
    )
    # 1.055 - 0.055 rounds below 1 in binary floating point.
    out[x == 1.0] = 1.0
    return np.clip(out, 0.0, 1.0)


def lanczos_kernel(x, a=LANCZOS_ORDER):
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < a, np.sinc(x) * np.sinc(x / a), 0.0)


def reflect_index(idx, n):
    """Map integer indices onto [0, n) by half-sample symmetric reflection."""
    idx = np.asarray(idx)
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - 1 - idx, idx)


def _lanczos_matrix(n_in, n_out):
    # Row i holds the normalized taps producing output sample i.
    scale = n_out / n_in
    stretch = min(scale, 1.0)
    support = LANCZOS_ORDER / stretch
    centers = (np.arange(n_out) + 0.5) / scale - 0.5
    first = np.floor(centers - support).astype(np.int64) + 1
    n_taps = int(math.ceil(2 * support)) + 1
    taps = first[:, None] + np.arange(n_taps)[None, :]
    weights = lanczos_kernel((centers[:, None] - taps) * stretch)
    weights /= weights.sum(axis=1, keepdims=True)
    mat = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), n_taps)
    np.add.at(mat, (rows, reflect_index(taps, n_in).ravel()), weights.ravel())
    return mat


def resample_to(arr, out_h, out_w):
    """Separable Lanczos-3 resampling of a 2-D or 3-D raster to a given size."""
    arr = np.asarray(arr, dtype=np.float64)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"degenerate output size {out_h}x{out_w}")
    h, w = arr.shape[:2]
    out = arr
    if out_h != h:
        out = np.tensordot(_lanczos_matrix(h, out_h), out, axes=(1, 0))
    if out_w != w:
        out = np.moveaxis(
            np.tensordot(_lanczos_matrix(w, out_w), np.moveaxis(out, 1, 0), axes=(1, 0)),
            0,
            1,
        )
    return np.ascontiguousarray(out)


def scaled_size(n, scale):
    return int(math.floor(n * scale + 0.5))


def resample_lanczos(img, scale):
    """Resample a linear image by ``scale`` with a separable Lanczos-3 kernel.

    Output dimensions are ``round(scale * H) x round(scale * W)``. Taps that
    fall outside the raster are reflected and each kernel row is renormalized,
    so constant images are reproduced.
    """
    arr = check_image(img, "img")
    scale = float(scale)
    if not scale > 0 or not math.isfinite(scale):
        raise ValueError(f"scale must be a positive finite number, got {scale}")
    out_h = scaled_size(arr.shape[0], scale)
    out_w = scaled_size(arr.shape[1], scale)
    return resample_to(arr, out_h, out_w)


def gaussian_taps(sigma):
    """Normalized Gaussian taps with radius ``ceil(3 * sigma)``."""
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (x / sigma) ** 2)
    return taps / taps.sum()


def blur(arr, sigma):
    """Separable Gaussian blur over the first two axes, reflective boundary."""
    arr = np.asarray(arr, dtype=np.float64)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return arr.copy()
    taps = gaussian_taps(sigma)
    out = ndimage.correlate1d(arr, taps, axis=0, mode="reflect")
    return ndimage.correlate1d(out, taps, axis=1, mode="reflect")


def gaussian_blur(img, sigma):
    return blur(check_image(img, "img"), float(sigma))


def quantize(img):
    """8-bit ADC: ``round(255 * x)`` with ties away from zero."""
    x = np.clip(check_image(img, "img"), 0.0, 1.0)
    return np.floor(x * 255.0 + 0.5).astype(np.uint8)


def dequantize(codes):
    return check_codes(codes).astype(np.float64) / 255.0


def luminance(img):
    """Rec. 709 luma of a linear RGB raster."""
    return np.asarray(img, dtype=np.float64) @ np.array([0.2126, 0.7152, 0.0722])


# -- PNG I/O ----------------------------------------------------------------


def read_png(path):
    """Decode an image file to an sRGB float raster in [0, 1]."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
            return np.repeat(arr[:, :, None], 3, axis=2)
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def read_mask_png(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return arr / 255.0


def read_codes(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_png(path, codes):
    """Write an 8-bit RGB PNG from a uint8 code raster."""
    codes = check_codes(codes)
    Image.fromarray(codes).save(path)


def write_png16(path, values):
    """Write a 16-bit RGB PNG from floats in [0, 1]."""
    x = np.clip(check_image(values, "values"), 0.0, 1.0)
    codes = np.floor(x * 65535.0 + 0.5).astype(np.uint16)
    h, w = codes.shape[:2]
    writer = png.Writer(width=w, height=h, bitdepth=16, greyscale=False)
    with open(path, "wb") as fh:
        writer.write(fh, codes.reshape(h, w * 3).tolist())
