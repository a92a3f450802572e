"""Rigid motion sampling under dual-stage (input and magnified) bounds."""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import ConfigurationError, check_range

MAX_INPUT_SHIFT_PX = 3.0
MAX_INPUT_ROTATION_DEG = 5.0
MAX_AMPLIFIED_SHIFT_PX = 30.0
MAX_AMPLIFIED_ROTATION_DEG = 10.0

ROTATION_DEAD_ZONE_DEG = 0.05

MOTION_KINDS = ("translation", "rotation", "combined")
DEFAULT_MIXTURE = (0.30, 0.30, 0.40)
DEFAULT_ALPHA_RANGE = (2.0, 30.0)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation about the object pivot (degrees) followed by a translation (px)."""

    theta: float = 0.0
    dx: float = 0.0
    dy: float = 0.0

    def __post_init__(self):
        for name in ("theta", "dx", "dy"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def shift(self):
        return math.hypot(self.dx, self.dy)

    def to_dict(self):
        return {"theta_deg": self.theta, "dx_px": self.dx, "dy_px": self.dy}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["theta_deg"]), float(d["dx_px"]), float(d["dy_px"]))


IDENTITY = RigidTransform()


@dataclass(frozen=True)
class MotionDraw:
    kind: str
    input: RigidTransform
    alpha: float
    amplified: RigidTransform


def interpolate_transform(a, b, factor):
    """Componentwise ``a + factor * (b - a)``; ``factor == 1`` returns ``b``."""
    if factor == 1:
        return b
    return RigidTransform(
        a.theta + factor * (b.theta - a.theta),
        a.dx + factor * (b.dx - a.dx),
        a.dy + factor * (b.dy - a.dy),
    )


def check_constraints(draw):
    """True iff the input and magnified motion both respect their bounds."""
    t_in = draw.input
    alpha = draw.alpha
    return (
        math.hypot(t_in.dx, t_in.dy) <= MAX_INPUT_SHIFT_PX
        and abs(t_in.theta) <= MAX_INPUT_ROTATION_DEG
        and math.hypot(alpha * t_in.dx, alpha * t_in.dy) <= MAX_AMPLIFIED_SHIFT_PX
        and abs(alpha * t_in.theta) <= MAX_AMPLIFIED_ROTATION_DEG
    )


def sample_alpha(rng, alpha_range=DEFAULT_ALPHA_RANGE):
    lo, hi = check_range(alpha_range, "alpha_range", lo_bound=1.0)
    if lo == hi:
        return lo
    return float(rng.uniform(lo, hi))


def _bound(input_limit, amplified_limit, alpha):
    # Shrunk by a relative 1e-12 so rounding in alpha * x can never cross the limit.
    return min(input_limit, amplified_limit / alpha) * (1.0 - 1e-12)


def _check_mixture(mixture):
    p = np.asarray(mixture, dtype=np.float64)
    if p.shape != (3,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"motion mixture must be 3 weights summing to 1, got {mixture!r}")
    return np.cumsum(p)


def sample_motion(rng, alpha, mixture=DEFAULT_MIXTURE):
    """Draw one motion for frame B, constructed to satisfy every bound for ``alpha``.

    The translation magnitude is uniform on ``(0, min(3, 30/alpha)]`` with a
    uniform direction; the rotation is uniform on ``[-r, r]`` with
    ``r = min(5, 10/alpha)``, excluding a small dead zone around zero for
    rotation-bearing kinds.
    """
    alpha = float(alpha)
    if not alpha >= 1.0 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be a finite number >= 1, got {alpha}")
    cdf = _check_mixture(mixture)
    u = rng.random()
    kind = MOTION_KINDS[int(np.searchsorted(cdf, u, side="right").clip(max=2))]

    dx = dy = theta = 0.0
    if kind != "rotation":
        max_shift = _bound(MAX_INPUT_SHIFT_PX, MAX_AMPLIFIED_SHIFT_PX, alpha)
        mag = (1.0 - rng.random()) * max_shift
        phi = rng.uniform(0.0, 2.0 * math.pi)
        dx, dy = mag * math.cos(phi), mag * math.sin(phi)
    if kind != "translation":
        max_rot = _bound(MAX_INPUT_ROTATION_DEG, MAX_AMPLIFIED_ROTATION_DEG, alpha)
        dead = min(ROTATION_DEAD_ZONE_DEG, max_rot)
        theta = rng.uniform(dead, max_rot)
        if rng.random() < 0.5:
            theta = -theta

    t_in = RigidTransform(theta, dx, dy)
    return MotionDraw(kind, t_in, alpha, interpolate_transform(IDENTITY, t_in, alpha))


def zero_motion(alpha):
    return MotionDraw("translation", IDENTITY, float(alpha), IDENTITY)
