"""Input validation helpers shared by the public functions and estimators."""

import numpy as np


class ConfigurationError(ValueError):
    """Raised for invalid configuration values or unusable asset sources."""


def check_image(img, name="img", allow_out_of_range=True):
    """Validate an HxWx3 raster and return it as a float64 array.

    Non-finite values are always rejected. When ``allow_out_of_range`` is
    false, values outside [0, 1] are rejected too.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got {arr.shape[:2]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if not allow_out_of_range and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_mask(mask, name="mask"):
    arr = np.asarray(mask, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have shape (H, W), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_codes(codes, name="codes"):
    """Validate an 8-bit code raster (H, W, 3) or (H, W)."""
    arr = np.asarray(codes)
    if arr.ndim not in (2, 3):
        raise ValueError(f"{name} must be 2-D or 3-D, got {arr.ndim}-D")
    if arr.dtype.kind not in "ui":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError(f"{name} must hold integer codes")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError(f"{name} codes must lie in [0, 255]")
    return arr.astype(np.uint8)


def check_same_shape(a, b, names=("a", "b")):
    if np.shape(a) != np.shape(b):
        raise ValueError(
            f"shape mismatch: {names[0]} {np.shape(a)} vs {names[1]} {np.shape(b)}"
        )


def check_positive(value, name, strict=True):
    value = float(value)
    if not np.isfinite(value) and not (value == np.inf and strict):
        raise ValueError(f"{name} must be finite, got {value}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value


def check_range(pair, name, lo_bound=None):
    """Validate a closed interval ``(lo, hi)`` with ``lo <= hi``."""
    try:
        lo, hi = (float(v) for v in pair)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a pair of numbers, got {pair!r}")
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ConfigurationError(f"{name} must satisfy lo <= hi, got {pair!r}")
    if lo_bound is not None and lo < lo_bound:
        raise ConfigurationError(f"{name} must be >= {lo_bound}, got {pair!r}")
    return lo, hi
