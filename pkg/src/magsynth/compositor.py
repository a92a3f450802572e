"""Sub-pixel rigid warping and over-compositing in linear light."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_image
from .assets import MASK_FEATHER_SIGMA, ForegroundObject
from .kinematics import IDENTITY, MAX_AMPLIFIED_SHIFT_PX, MotionDraw, RigidTransform

logger = logging.getLogger(__name__)

FRAMES = ("A", "B", "amp")
FEATHER_RADIUS = int(math.ceil(3 * MASK_FEATHER_SIGMA))
DEFAULT_IOU_CAP = 0.3
MAX_PLACEMENT_RETRIES = 100
# Cubic taps reach one sample before and two after the base index.
_TAP_PAD = 2


class SceneRejected(RuntimeError):
    """No object of a scene could be placed."""


@dataclass
class PlacedObject:
    """An aligned object, its integer canvas anchor and per-frame transforms.

    ``anchor`` is the canvas position (x, y) of the crop's top-left pixel.
    """

    object: ForegroundObject
    anchor: tuple
    transforms: dict
    kind: str = "translation"

    def canvas_pivot(self):
        return (self.anchor[0] + self.object.pivot[0], self.anchor[1] + self.object.pivot[1])

    def bbox(self, frame, dilate=FEATHER_RADIUS):
        """Axis-aligned box (x0, y0, x1, y1) of the transformed crop."""
        h, w = self.object.mask.shape
        corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=np.float64)
        pts = _forward(corners, self.object.pivot, self.transforms[frame], self.anchor)
        return (
            pts[:, 0].min() - dilate,
            pts[:, 1].min() - dilate,
            pts[:, 0].max() + dilate,
            pts[:, 1].max() + dilate,
        )

    def in_frame(self, canvas_hw):
        h, w = canvas_hw
        for frame in FRAMES:
            x0, y0, x1, y1 = self.bbox(frame)
            if x0 < 0 or y0 < 0 or x1 > w - 1 or y1 > h - 1:
                return False
        return True


def _cos_sin(theta_deg):
    # Exact values at quarter turns keep 90-degree warps a pure permutation.
    quarter, rem = divmod(theta_deg, 90.0)
    if rem == 0.0:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[int(quarter) % 4]
    rad = math.radians(theta_deg)
    return math.cos(rad), math.sin(rad)


def _forward(pts, pivot, tf, anchor):
    c, s = _cos_sin(tf.theta)
    px, py = pivot
    x = pts[:, 0] - px
    y = pts[:, 1] - py
    return np.stack(
        [anchor[0] + px + c * x - s * y + tf.dx, anchor[1] + py + s * x + c * y + tf.dy],
        axis=1,
    )


def _inverse(xs, ys, pivot, tf, anchor):
    # Canvas coordinates back to crop coordinates.
    u = xs - anchor[0] - tf.dx
    v = ys - anchor[1] - tf.dy
    if tf.theta == 0.0:
        return u, v
    c, s = _cos_sin(tf.theta)
    px, py = pivot
    u = u - px
    v = v - py
    return px + c * u + s * v, py - s * u + c * v


def catmull_rom_weights(t):
    """Four Catmull-Rom taps for fractional offsets ``t`` in [0, 1)."""
    t2 = t * t
    t3 = t2 * t
    return (
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    )


def _gather_cubic(padded, qx, qy, pad):
    # ``padded`` carries a ``pad``-pixel border; coordinates are in unpadded
    # units and are clamped onto the border, so far-away samples read border
    # values only.
    h, w = padded.shape[:2]
    qx = np.clip(qx + pad, 0.0, w - 1.0)
    qy = np.clip(qy + pad, 0.0, h - 1.0)
    ix = np.floor(qx).astype(np.int64)
    iy = np.floor(qy).astype(np.int64)
    wx = catmull_rom_weights(qx - ix)
    wy = catmull_rom_weights(qy - iy)
    flat = padded.reshape(h * w, -1)
    cols = [np.clip(ix + i - 1, 0, w - 1) for i in range(4)]
    out = None
    for j in range(4):
        base = np.clip(iy + j - 1, 0, h - 1) * w
        row_acc = None
        for i in range(4):
            term = wx[i][..., None] * np.take(flat, base + cols[i], axis=0)
            row_acc = term if row_acc is None else row_acc + term
        term = wy[j][..., None] * row_acc
        out = term if out is None else out + term
    return out


def bicubic_sample(src, qx, qy, outside="clamp"):
    """Sample ``src`` (H, W) or (H, W, C) at real coordinates.

    ``outside="clamp"`` replicates edge pixels; ``outside="zero"`` treats
    everything beyond the raster as zero.
    """
    src = np.asarray(src, dtype=np.float64)
    squeeze = src.ndim == 2
    arr = src[..., None] if squeeze else src
    mode = {"clamp": "edge", "zero": "constant"}[outside]
    padded = np.pad(arr, ((_TAP_PAD, _TAP_PAD), (_TAP_PAD, _TAP_PAD), (0, 0)), mode=mode)
    out = _gather_cubic(padded, np.asarray(qx, np.float64), np.asarray(qy, np.float64), _TAP_PAD)
    return out[..., 0] if squeeze else out


def _padded_rgba(obj):
    # Image with replicated edges and mask with a zero border, stacked.
    pad = ((_TAP_PAD, _TAP_PAD), (_TAP_PAD, _TAP_PAD))
    img = np.pad(obj.image, pad + ((0, 0),), mode="edge")
    mask = np.pad(obj.mask, pad)
    return np.concatenate([img, mask[..., None]], axis=2)


def _is_integer_shift(tf, anchor):
    return (
        tf.theta == 0.0
        and float(tf.dx + anchor[0]).is_integer()
        and float(tf.dy + anchor[1]).is_integer()
    )


def _warp_patch(obj, tf, anchor, canvas_hw):
    """Warp onto the canvas region touched by the object.

    Returns ``(y0, x0, image_patch, mask_patch)`` or ``None`` when the object
    misses the canvas entirely.
    """
    h, w = obj.mask.shape
    if _is_integer_shift(tf, anchor):
        # Whole-pixel shifts are exact copies; the cubic taps would be (0, 1, 0, 0).
        ox, oy = int(tf.dx + anchor[0]), int(tf.dy + anchor[1])
        x0, y0 = max(0, ox), max(0, oy)
        x1, y1 = min(canvas_hw[1], ox + w), min(canvas_hw[0], oy + h)
        if x1 <= x0 or y1 <= y0:
            return None
        src = (slice(y0 - oy, y1 - oy), slice(x0 - ox, x1 - ox))
        return y0, x0, obj.image[src].copy(), obj.mask[src].copy()

    corners = np.array(
        [[-_TAP_PAD, -_TAP_PAD], [w - 1 + _TAP_PAD, -_TAP_PAD],
         [-_TAP_PAD, h - 1 + _TAP_PAD], [w - 1 + _TAP_PAD, h - 1 + _TAP_PAD]],
        dtype=np.float64,
    )
    pts = _forward(corners, obj.pivot, tf, anchor)
    x0 = max(0, int(math.floor(pts[:, 0].min())))
    y0 = max(0, int(math.floor(pts[:, 1].min())))
    x1 = min(canvas_hw[1] - 1, int(math.ceil(pts[:, 0].max())))
    y1 = min(canvas_hw[0] - 1, int(math.ceil(pts[:, 1].max())))
    if x1 < x0 or y1 < y0:
        return None
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1].astype(np.float64)
    qx, qy = _inverse(xs, ys, obj.pivot, tf, anchor)
    rgba = _gather_cubic(_padded_rgba(obj), qx, qy, _TAP_PAD)
    # Cubic overshoot is clamped so the over operator stays a convex blend.
    return y0, x0, np.clip(rgba[..., :3], 0.0, 1.0), np.clip(rgba[..., 3], 0.0, 1.0)


def warp_object(obj, tf, anchor, canvas_hw):
    """Warp an object onto a blank canvas of size ``canvas_hw``.

    Inverse mapping with Catmull-Rom bicubic sampling. The rotation is about
    the object's pivot, followed by the translation; the crop's top-left
    pixel lands at ``anchor`` under the identity transform. Pixels with zero
    mask carry zero colour.
    """
    img = np.zeros(tuple(canvas_hw) + (3,))
    mask = np.zeros(tuple(canvas_hw))
    patch = _warp_patch(obj, tf, anchor, canvas_hw)
    if patch is not None:
        y0, x0, pimg, pmask = patch
        # Colour outside the object's support is meaningless; report it as zero.
        pimg = np.where(pmask[..., None] > 0.0, pimg, 0.0)
        img[y0 : y0 + pimg.shape[0], x0 : x0 + pimg.shape[1]] = pimg
        mask[y0 : y0 + pmask.shape[0], x0 : x0 + pmask.shape[1]] = pmask
    return img, mask


def composite(bg, placed, frame):
    """Back-to-front over-compositing: ``out = obj * m + out * (1 - m)``.

    Objects are drawn in list order. Pixels not touched by any mask keep the
    background value bit-exactly.
    """
    if frame not in FRAMES:
        raise ValueError(f"frame must be one of {FRAMES}, got {frame!r}")
    out = check_image(bg, "bg").copy()
    for p in placed:
        patch = _warp_patch(p.object, p.transforms[frame], p.anchor, out.shape[:2])
        if patch is None:
            continue
        y0, x0, img, mask = patch
        region = out[y0 : y0 + img.shape[0], x0 : x0 + img.shape[1]]
        m = mask[..., None]
        region[...] = img * m + region * (1.0 - m)
    return np.clip(out, 0.0, 1.0)


def _footprint(obj):
    return obj.mask > 0.5


def _iou(fp_a, anchor_a, fp_b, anchor_b):
    ax, ay = anchor_a
    bx, by = anchor_b
    x0, y0 = max(ax, bx), max(ay, by)
    x1 = min(ax + fp_a.shape[1], bx + fp_b.shape[1])
    y1 = min(ay + fp_a.shape[0], by + fp_b.shape[0])
    inter = 0
    if x1 > x0 and y1 > y0:
        sa = fp_a[y0 - ay : y1 - ay, x0 - ax : x1 - ax]
        sb = fp_b[y0 - by : y1 - by, x0 - bx : x1 - bx]
        inter = int(np.count_nonzero(sa & sb))
    union = int(fp_a.sum()) + int(fp_b.sum()) - inter
    return inter / union if union else 0.0


def transforms_for(draw):
    """Frame transforms: A is the reference pose, B the sampled motion."""
    return {"A": IDENTITY, "B": draw.input, "amp": draw.amplified}


def place_objects(bg, objs, draws, rng, iou_cap=DEFAULT_IOU_CAP, max_retries=MAX_PLACEMENT_RETRIES):
    """Choose integer anchors keeping every frame's pose inside the canvas.

    Each object's pivot keeps a margin of the largest magnified shift plus
    its half-diagonal plus the mask feather from every edge, so no
    in-bounds rotation or translation leaves the frame. Reference-pose mask
    overlap with earlier objects is capped at ``iou_cap`` (IoU). Objects that
    cannot be placed within ``max_retries`` draws are dropped with a warning.
    """
    if len(objs) != len(draws):
        raise ValueError("objs and draws must have equal length")
    h, w = np.shape(bg)[:2]
    placed = []
    footprints = []
    for idx, (obj, draw) in enumerate(zip(objs, draws)):
        if not isinstance(draw, MotionDraw):
            raise TypeError("draws must be MotionDraw instances")
        oh, ow = obj.mask.shape
        px, py = obj.pivot
        half_diag = max(math.hypot(cx - px, cy - py) for cx in (0, ow - 1) for cy in (0, oh - 1))
        margin = MAX_AMPLIFIED_SHIFT_PX + half_diag + FEATHER_RADIUS
        ax_lo, ax_hi = math.ceil(margin - px), math.floor(w - 1 - margin - px)
        ay_lo, ay_hi = math.ceil(margin - py), math.floor(h - 1 - margin - py)
        if ax_lo > ax_hi or ay_lo > ay_hi:
            logger.warning("object %d (%s) does not fit the canvas; dropped", idx, obj.asset_id)
            continue
        fp = _footprint(obj)
        for _ in range(max_retries):
            anchor = (int(rng.integers(ax_lo, ax_hi + 1)), int(rng.integers(ay_lo, ay_hi + 1)))
            if all(_iou(fp, anchor, f, p.anchor) <= iou_cap for f, p in zip(footprints, placed)):
                placed.append(PlacedObject(obj, anchor, transforms_for(draw), draw.kind))
                footprints.append(fp)
                break
        else:
            logger.warning(
                "object %d (%s) not placed after %d retries; dropped", idx, obj.asset_id, max_retries
            )
    if not placed:
        raise SceneRejected("no object could be placed")
    return placed


def with_transforms(placed, transforms):
    """Copy of ``placed`` objects carrying replacement transforms."""
    return [PlacedObject(p.object, p.anchor, dict(t), p.kind) for p, t in zip(placed, transforms)]


__all__ = [
    "FRAMES",
    "PlacedObject",
    "RigidTransform",
    "SceneRejected",
    "bicubic_sample",
    "catmull_rom_weights",
    "composite",
    "place_objects",
    "transforms_for",
    "warp_object",
]
