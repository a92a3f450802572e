"""Background and foreground asset ingestion and preparation.

Assets come either from image directories or from a seeded procedural
generator. A catalog holds lightweight references; rasters are produced
on demand so catalogs pickle cheaply into worker processes.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core_image as ci
from ._validation import ConfigurationError, check_image, check_mask, check_range

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-3
MASK_FEATHER_SIGMA = 1.0
# Zero-mask border added around a scaled crop so warps never clip the feather.
CROP_PAD = 4
# Mask level below which crop borders are trimmed after scaling.
MASK_TRIM_LEVEL = 1e-3
_ALIGN_ITERATIONS = 8


@dataclass(frozen=True)
class PrepConfig:
    """Randomization ranges for Stage I asset preparation."""

    bg_blur_sigma: tuple = (0.3, 1.0)
    bg_noise_sigma: tuple = (0.002, 0.01)
    fg_area_fraction: tuple = (0.005, 0.04)
    fg_blur_sigma: tuple = (0.3, 1.0)

    def __post_init__(self):
        check_range(self.bg_blur_sigma, "bg_blur_sigma", lo_bound=0.0)
        check_range(self.bg_noise_sigma, "bg_noise_sigma", lo_bound=0.0)
        lo, hi = check_range(self.fg_area_fraction, "fg_area_fraction", lo_bound=0.0)
        if lo <= 0 or hi > 1:
            raise ConfigurationError("fg_area_fraction must lie in (0, 1]")
        check_range(self.fg_blur_sigma, "fg_blur_sigma", lo_bound=0.0)


@dataclass
class ForegroundObject:
    """A linear-light object crop with its soft mask.

    ``pivot`` is (x, y) in crop pixel coordinates and defaults to the mask
    centroid.
    """

    image: np.ndarray
    mask: np.ndarray
    pivot: tuple = None
    asset_id: str = ""

    def __post_init__(self):
        self.image = check_image(self.image, "image")
        self.mask = check_mask(self.mask)
        if self.image.shape[:2] != self.mask.shape:
            raise ValueError(
                f"image {self.image.shape[:2]} and mask {self.mask.shape} dimensions differ"
            )
        if self.mask.max() <= 0.5:
            raise ValueError("mask has no value above 0.5")
        if self.pivot is None:
            self.pivot = mask_centroid(self.mask)

    @property
    def area(self):
        return float(self.mask.sum())


def mask_centroid(mask):
    total = mask.sum()
    ys, xs = np.indices(mask.shape)
    return (float((xs * mask).sum() / total), float((ys * mask).sum() / total))


@dataclass(frozen=True)
class AssetCatalog:
    """Immutable lists of asset references.

    Directory references are paths (backgrounds) or ``(image, mask)`` path
    pairs. Procedural references are ``(seed, index)`` tuples.
    """

    backgrounds: tuple
    foregrounds: tuple
    origin: str
    bg_size: tuple = None
    skipped: tuple = field(default=())

    def __post_init__(self):
        if self.origin not in ("directory", "procedural"):
            raise ConfigurationError(f"unknown catalog origin {self.origin!r}")
        if not self.backgrounds or not self.foregrounds:
            raise ConfigurationError("empty asset catalog")

    def background(self, i):
        """Background ``i`` as an sRGB float raster."""
        ref = self.backgrounds[i]
        if self.origin == "procedural":
            return procedural_background(*ref, size=self.bg_size)
        return ci.read_png(ref)

    def foreground(self, i):
        """Foreground ``i`` as an sRGB float raster and soft mask."""
        ref = self.foregrounds[i]
        if self.origin == "procedural":
            return procedural_foreground(*ref)
        img = ci.read_png(ref[0])
        mask = ci.read_mask_png(ref[1])
        if img.shape[:2] != mask.shape:
            raise ValueError(f"mask size mismatch for {ref[0]}")
        if np.all((mask == 0.0) | (mask == 1.0)):
            mask = np.clip(ci.blur(mask, MASK_FEATHER_SIGMA), 0.0, 1.0)
        return img, mask

    def background_id(self, i):
        ref = self.backgrounds[i]
        return f"bg:{ref[1]}" if self.origin == "procedural" else Path(ref).stem

    def foreground_id(self, i):
        ref = self.foregrounds[i]
        return f"fg:{ref[1]}" if self.origin == "procedural" else Path(ref[0]).stem

    def load_object(self, i):
        img, mask = self.foreground(i)
        return ForegroundObject(ci.srgb_to_linear(img), mask, asset_id=self.foreground_id(i))


def _decodable(path):
    try:
        ci.read_png(path)
    except Exception as exc:  # noqa: BLE001 - any decoder failure means skip
        logger.warning("skipping undecodable asset %s: %s", path, exc)
        return False
    return True


def load_catalog(bg_dir, fg_dir):
    """Scan ``bg_dir/*.png`` and ``fg_dir/<stem>.png`` + ``<stem>_mask.png``."""
    bg_dir, fg_dir = Path(bg_dir), Path(fg_dir)
    for d in (bg_dir, fg_dir):
        if not d.is_dir():
            raise ConfigurationError(f"asset directory not found: {d}")
    skipped = []
    backgrounds = []
    for p in sorted(bg_dir.glob("*.png")):
        if _decodable(p):
            backgrounds.append(str(p))
        else:
            skipped.append(str(p))

    foregrounds = []
    for p in sorted(fg_dir.glob("*.png")):
        if p.stem.endswith("_mask"):
            continue
        mask = p.with_name(f"{p.stem}_mask.png")
        if not mask.exists():
            logger.warning("foreground %s has no mask file %s; skipped", p.name, mask.name)
            skipped.append(str(p))
            continue
        if _decodable(p) and _decodable(mask):
            foregrounds.append((str(p), str(mask)))
        else:
            skipped.append(str(p))

    if not backgrounds or not foregrounds:
        raise ConfigurationError("empty asset catalog")
    return AssetCatalog(tuple(backgrounds), tuple(foregrounds), "directory", skipped=tuple(skipped))


def procedural_catalog(seed, n_bg, n_fg, bg_size=(384, 384)):
    """Catalog of ``n_bg`` backgrounds and ``n_fg`` foregrounds drawn from ``seed``."""
    if n_bg < 1 or n_fg < 1:
        raise ConfigurationError("procedural catalog counts must be >= 1")
    seed = int(seed)
    return AssetCatalog(
        tuple((seed, i) for i in range(n_bg)),
        tuple((seed, i) for i in range(n_fg)),
        "procedural",
        bg_size=tuple(int(v) for v in bg_size),
    )


def _asset_rng(seed, kind, index):
    return np.random.default_rng([int(seed), kind, int(index)])


def procedural_background(seed, index, size=(384, 384)):
    """Smooth multi-scale color noise with a gradient and stripe texture (sRGB)."""
    rng = _asset_rng(seed, 0, index)
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    out = np.zeros((h, w, 3))
    base = rng.uniform(0.2, 0.8, size=3)
    grad = rng.uniform(-0.25, 0.25, size=(2, 3))
    out += base + xx[..., None] * grad[0] + yy[..., None] * grad[1]
    for cells, amp in ((4, 0.15), (16, 0.06), (64, 0.03)):
        coarse = rng.standard_normal((cells, cells, 3))
        out += amp * ci.resample_to(coarse, h, w)
    freq = rng.uniform(8, 40)
    angle = rng.uniform(0, np.pi)
    stripes = np.sin(2 * np.pi * freq * (xx * np.cos(angle) + yy * np.sin(angle)))
    out += rng.uniform(0.01, 0.05) * stripes[..., None]
    return np.clip(out, 0.0, 1.0)


def procedural_foreground(seed, index):
    """A textured ellipse or polygon with a feathered mask (sRGB image, mask)."""
    rng = _asset_rng(seed, 1, index)
    size = int(rng.integers(48, 129))
    pad = 6
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    r_max = c - pad
    if rng.random() < 0.5:
        ax = rng.uniform(0.6, 1.0, size=2) * r_max
        rot = rng.uniform(0, np.pi)
        u = (xx - c) * np.cos(rot) + (yy - c) * np.sin(rot)
        v = -(xx - c) * np.sin(rot) + (yy - c) * np.cos(rot)
        inside = (u / ax[0]) ** 2 + (v / ax[1]) ** 2 <= 1.0
    else:
        # Star-convex polygon: jittered, evenly spaced vertex angles.
        n_vert = int(rng.integers(5, 10))
        angles = (np.arange(n_vert) + rng.uniform(-0.3, 0.3, n_vert)) * 2 * np.pi / n_vert
        radii = rng.uniform(0.6, 1.0, n_vert) * r_max
        inside = _polygon_mask(c + radii * np.cos(angles), c + radii * np.sin(angles), xx, yy)
    mask = np.clip(ci.blur(inside.astype(np.float64), MASK_FEATHER_SIGMA), 0.0, 1.0)

    color = rng.uniform(0.05, 0.95, size=3)
    tex = ci.resample_to(rng.standard_normal((6, 6, 3)), size, size)
    checker = ((xx // rng.integers(4, 12) + yy // rng.integers(4, 12)) % 2)[..., None]
    img = np.clip(color + 0.12 * tex + rng.uniform(0.02, 0.1) * (checker - 0.5), 0.0, 1.0)
    return img, mask


def _polygon_mask(vx, vy, xx, yy):
    # Even-odd rule point-in-polygon over the pixel grid.
    inside = np.zeros(xx.shape, dtype=bool)
    n = len(vx)
    for i in range(n):
        x0, y0, x1, y1 = vx[i], vy[i], vx[(i + 1) % n], vy[(i + 1) % n]
        if y0 == y1:
            continue
        crosses = (yy >= min(y0, y1)) & (yy < max(y0, y1))
        x_at = x0 + (yy - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (xx < x_at)
    return inside


def _fit_to(src, out_h, out_w):
    # Center-crop to the target aspect ratio, then Lanczos-resample to size.
    h, w = src.shape[:2]
    if (h, w) == (out_h, out_w):
        return src
    target = out_w / out_h
    if w / h > target:
        cw = max(1, int(round(h * target)))
        x0 = (w - cw) // 2
        src = src[:, x0 : x0 + cw]
    else:
        ch = max(1, int(round(w / target)))
        y0 = (h - ch) // 2
        src = src[y0 : y0 + ch]
    return ci.resample_to(src, out_h, out_w)


def prepare_background(src, s, rng, lr_size=None, config=PrepConfig(), blur_sigma=None, noise_sigma=None):
    """Linearize, upsample by ``s``, then mildly blur and add noise.

    ``lr_size`` (H, W) fits the source to that low-resolution frame before
    upsampling. ``blur_sigma`` and ``noise_sigma`` override the configured
    random draws. Returns the clipped linear background.
    """
    s = float(s)
    if s < 1:
        raise ValueError(f"upsampling factor must be >= 1, got {s}")
    src = check_image(src, "src")
    if blur_sigma is None:
        blur_sigma = rng.uniform(*config.bg_blur_sigma)
    if noise_sigma is None:
        noise_sigma = rng.uniform(*config.bg_noise_sigma)

    lin = ci.srgb_to_linear(src)
    h, w = lr_size if lr_size is not None else lin.shape[:2]
    lin = _fit_to(lin, int(h), int(w)) if lr_size is not None else lin
    bg = ci.resample_to(lin, ci.scaled_size(h, s), ci.scaled_size(w, s)) if s != 1 else lin
    bg = ci.blur(bg, blur_sigma)
    if noise_sigma > 0:
        bg = bg + rng.normal(0.0, noise_sigma, size=bg.shape)
    return np.clip(bg, 0.0, 1.0)


def masked_stats(values, weights):
    total = weights.sum()
    mean = (values * weights).sum() / total
    var = (((values - mean) ** 2) * weights).sum() / total
    return float(mean), float(math.sqrt(max(var, 0.0)))


def _match_stats(img, mask, target_mean, target_std):
    # Affine remap of luminance, refined iteratively because the clip to
    # [0, 1] perturbs the moments of the first solve. Chroma (the per-channel
    # residual from luminance) gets the same gain and is then shrunk per pixel
    # just enough to stay in gamut, which leaves luminance untouched.
    lum = ci.luminance(img)
    chroma = img - lum[..., None]
    gain_total, offset_total = 1.0, 0.0
    out_lum = lum
    for _ in range(_ALIGN_ITERATIONS):
        mean, std = masked_stats(out_lum, mask)
        match_std = std > STD_FLOOR and target_std > STD_FLOOR
        gain = target_std / std if match_std else 1.0
        gain_total *= gain
        offset_total = gain * offset_total + (target_mean - gain * mean)
        out_lum = np.clip(gain_total * lum + offset_total, 0.0, 1.0)
        new_mean, new_std = masked_stats(out_lum, mask)
        ok_mean = abs(new_mean - target_mean) <= 1e-3 * max(target_mean, 1e-6)
        ok_std = not match_std or abs(new_std - target_std) <= 1e-3 * target_std
        if ok_mean and ok_std:
            break
    chroma = gain_total * chroma
    base = out_lum[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(chroma > 0, (1.0 - base) / chroma, np.where(chroma < 0, base / -chroma, np.inf))
    k = np.clip(room.min(axis=-1), 0.0, 1.0)
    return np.clip(base + k[..., None] * chroma, 0.0, 1.0)


def align_foreground(obj, bg, rng, config=PrepConfig(), area_fraction=None, blur_sigma=None):
    """Adaptive scaling, sharpness matching and statistical alignment.

    The object is resampled so its soft-mask area is a drawn fraction of the
    background area, padded with an empty border, blurred with a drawn sigma,
    and its Rec. 709 luminance affinely remapped so the mask-weighted mean and
    std match the background. Every channel gets the same gain; colours that
    would leave [0, 1] are pulled toward their luminance instead of clipped.
    Std matching is skipped when either std is below 1e-3.

    Raises ValueError if the scaled mask is empty; callers draw a new asset.
    """
    bg = check_image(bg, "bg")
    if area_fraction is None:
        area_fraction = rng.uniform(*config.fg_area_fraction)
    if blur_sigma is None:
        blur_sigma = rng.uniform(*config.fg_blur_sigma)

    target_area = area_fraction * bg.shape[0] * bg.shape[1]
    h, w = obj.mask.shape
    scale = math.sqrt(target_area / obj.area)
    out_h, out_w = ci.scaled_size(h, scale), ci.scaled_size(w, scale)
    if out_h < 1 or out_w < 1:
        raise ValueError("object vanishes after scaling")
    img = ci.resample_to(obj.image, out_h, out_w)
    mask = np.clip(ci.resample_to(obj.mask, out_h, out_w), 0.0, 1.0)
    if mask.max() <= 0.5:
        raise ValueError("object mask empty after scaling")
    rows = np.flatnonzero(mask.max(axis=1) > MASK_TRIM_LEVEL)
    cols = np.flatnonzero(mask.max(axis=0) > MASK_TRIM_LEVEL)
    crop = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
    img, mask = img[crop], mask[crop]

    pad = ((CROP_PAD, CROP_PAD), (CROP_PAD, CROP_PAD), (0, 0))
    img = np.pad(np.clip(img, 0.0, 1.0), pad, mode="edge")
    mask = np.pad(mask, CROP_PAD)
    img = ci.blur(img, blur_sigma)

    bg_mean, bg_std = masked_stats(ci.luminance(bg), np.ones(bg.shape[:2]))
    img = _match_stats(img, mask, bg_mean, bg_std)
    return ForegroundObject(img, mask, asset_id=obj.asset_id)
