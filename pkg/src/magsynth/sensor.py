"""Sensor degradation: noisy observed frames and the noise-free ground truth.

Both paths share one tone curve, one anti-aliased decimator and one ADC,
built by :func:`optical_chain`, so they can only differ by the noise term.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import core_image as ci
from ._validation import check_image, check_positive

# Gains at or above this are treated as the photon-unlimited regime.
SHOT_GAIN_LIMIT = 1e12


@dataclass(frozen=True)
class DegradationParams:
    """Noise and optics parameters of one sample.

    ``shot_gain`` is in electrons per unit linear intensity, so shot-noise
    variance is ``intensity / shot_gain``; gains of at least 1e12 (including
    ``math.inf``) disable shot noise.
    ``aa_sigma`` defaults to ``0.5 * down_factor`` HR pixels.
    """

    shot_gain: float = 1000.0
    read_sigma: float = 0.002
    down_factor: int = 2
    aa_sigma: float = None
    seed: int = 0

    def __post_init__(self):
        check_positive(self.shot_gain, "shot_gain")
        check_positive(self.read_sigma, "read_sigma", strict=False)
        if int(self.down_factor) != self.down_factor or self.down_factor < 1:
            raise ValueError(f"down_factor must be an integer >= 1, got {self.down_factor}")
        object.__setattr__(self, "down_factor", int(self.down_factor))
        if self.aa_sigma is None:
            object.__setattr__(self, "aa_sigma", 0.5 * self.down_factor)
        check_positive(self.aa_sigma, "aa_sigma", strict=False)

    @property
    def noiseless(self):
        return self.read_sigma == 0 and self.shot_gain >= SHOT_GAIN_LIMIT

    def to_dict(self):
        d = asdict(self)
        if math.isinf(d["shot_gain"]):
            d["shot_gain"] = None
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("shot_gain") is None:
            d["shot_gain"] = math.inf
        return cls(**d)


def add_sensor_noise(img, params, rng):
    """Heteroscedastic Gaussian shot noise plus Gaussian read noise, clipped."""
    img = check_image(img, "img")
    if params.noiseless:
        return np.clip(img, 0.0, 1.0)
    var = np.full(img.shape, params.read_sigma**2)
    if params.shot_gain < SHOT_GAIN_LIMIT:
        var += np.clip(img, 0.0, None) / params.shot_gain
    std = np.sqrt(var)
    return np.clip(img + std * rng.standard_normal(img.shape), 0.0, 1.0)


def downsample(img, params):
    """Gaussian anti-alias prefilter, then area-average decimation by ``down_factor``."""
    img = check_image(img, "img")
    s = params.down_factor
    h, w = img.shape[:2]
    if h // s < 1 or w // s < 1:
        raise ValueError(f"{h}x{w} image cannot be decimated by {s}")
    if h % s or w % s:
        raise ValueError(f"{h}x{w} image is not divisible by down_factor {s}")
    out = ci.blur(img, params.aa_sigma)
    if s == 1:
        return out
    return out.reshape(h // s, s, w // s, s, 3).mean(axis=(1, 3))


def optical_chain(params):
    """Shared tone curve -> decimation -> ADC closure used by both paths."""

    def chain(linear):
        return ci.quantize(downsample(ci.linear_to_srgb(linear), params))

    return chain


def degrade_input(j, params, rng):
    """Observed frame: ``Q(downsample(srgb(J + noise)))``."""
    return optical_chain(params)(add_sensor_noise(j, params, rng))


def clean_ground_truth(j_amp, params):
    """Ground-truth frame through the same chain with the noise term omitted."""
    return optical_chain(params)(check_image(j_amp, "j_amp"))


def pre_quantization(j, params, rng=None):
    """LR sRGB floats right before the ADC (noisy when ``rng`` is given)."""
    if rng is not None:
        j = add_sensor_noise(j, params, rng)
    return downsample(ci.linear_to_srgb(j), params)


class SensorDegradation(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping HR linear frames to 8-bit LR frames.

    Accepts a single (H, W, 3) frame or a stack (N, H, W, 3). With
    ``noise=False`` it yields the ground-truth path. Each call to
    ``transform`` draws noise from a generator seeded with ``seed``, so
    repeated calls are reproducible.
    """

    def __init__(self, shot_gain=1000.0, read_sigma=0.002, down_factor=2, aa_sigma=None, noise=True, seed=0):
        self.shot_gain = shot_gain
        self.read_sigma = read_sigma
        self.down_factor = down_factor
        self.aa_sigma = aa_sigma
        self.noise = noise
        self.seed = seed

    def _params(self):
        return DegradationParams(
            shot_gain=self.shot_gain,
            read_sigma=self.read_sigma,
            down_factor=self.down_factor,
            aa_sigma=self.aa_sigma,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim not in (3, 4) or X.shape[-1] != 3:
            raise ValueError(f"expected (H, W, 3) or (N, H, W, 3), got {X.shape}")
        self.params_ = self._params()
        self.hr_shape_ = X.shape[-3:-1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 3
        frames = X[None] if single else X
        rng = np.random.default_rng(self.seed)
        if self.noise:
            out = np.stack([degrade_input(f, self.params_, rng) for f in frames])
        else:
            out = np.stack([clean_ground_truth(f, self.params_) for f in frames])
        return out[0] if single else out
