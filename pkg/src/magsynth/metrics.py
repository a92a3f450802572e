"""Full-reference reconstruction metrics on 8-bit codes (peak 255)."""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import core_image as ci
from ._validation import check_codes, check_same_shape

PEAK = 255.0


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    psnr: float
    n_pixels: int

    def to_dict(self):
        return {
            "rmse": self.rmse,
            "psnr": None if math.isinf(self.psnr) else self.psnr,
            "n_pixels": self.n_pixels,
        }


def rmse(a, b):
    a, b = check_codes(a, "a"), check_codes(b, "b")
    check_same_shape(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt(np.mean(diff * diff)))


def psnr_from_rmse(value):
    if value == 0:
        return math.inf
    return 20.0 * math.log10(PEAK / value)


def psnr(a, b):
    """PSNR in dB; ``math.inf`` for identical images."""
    return psnr_from_rmse(rmse(a, b))


def report(a, b):
    value = rmse(a, b)
    return MetricReport(value, psnr_from_rmse(value), int(np.shape(a)[0] * np.shape(a)[1]))


def _pairs(pred, gt):
    pred, gt = Path(pred), Path(gt)
    if pred.is_file() and gt.is_file():
        return [(pred.name, pred, gt)]
    if pred.is_dir() and gt.is_dir():
        pairs = []
        for p in sorted(pred.rglob("*.png")):
            rel = p.relative_to(pred)
            g = gt / rel
            if g.exists():
                pairs.append((str(rel), p, g))
        if not pairs:
            raise FileNotFoundError(f"no matching PNG files between {pred} and {gt}")
        return pairs
    raise FileNotFoundError(f"pred and gt must both be files or both directories: {pred}, {gt}")


def evaluate_paths(pred, gt):
    """Per-pair and aggregate metrics for two PNG files or two directories.

    Directory inputs are matched by relative path. The aggregate RMSE pools
    squared errors over all pixels; the aggregate PSNR is the mean of the
    finite per-pair values.
    """
    per_pair = []
    sq_sum = 0.0
    count = 0
    for name, p, g in _pairs(pred, gt):
        a, b = ci.read_codes(p), ci.read_codes(g)
        rep = report(a, b)
        sq_sum += rep.rmse**2 * a.size
        count += a.size
        per_pair.append({"name": name, **rep.to_dict()})
    finite = [r["psnr"] for r in per_pair if r["psnr"] is not None]
    pooled = math.sqrt(sq_sum / count)
    return {
        "pairs": per_pair,
        "aggregate": {
            "n_pairs": len(per_pair),
            "rmse": pooled,
            "mean_rmse": float(np.mean([r["rmse"] for r in per_pair])),
            "mean_psnr": float(np.mean(finite)) if finite else None,
            "n_identical": len(per_pair) - len(finite),
        },
    }
