"""Reference latent magnification math at desk scale.

Feature maps are float64 arrays of shape (C, h, w). The manipulator,
static refiner and decoder are pluggable :class:`LatentOperator` instances
(identity, zero, or a small seeded random residual) because no trained
weights are involved. The selective scan is a diagonal state-space
recurrence whose step size is gated by the input.
"""

from dataclasses import dataclass, fields, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_same_shape

DEFAULT_BLOCKS = 12


def _features(f, name):
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError(f"{name} must have shape (C, h, w), got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite values")
    return f


@dataclass(frozen=True)
class LatentOperator:
    """Feature-space operator ``kind`` in {"identity", "zero", "random"}.

    The random kind is ``x + scale * tanh(W x)`` with a seeded 1x1 channel
    mixing ``W``; every kind maps zero to zero.
    """

    kind: str = "identity"
    seed: int = 0
    scale: float = 0.1

    def __post_init__(self):
        if self.kind not in ("identity", "zero", "random"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if not np.isfinite(self.scale):
            raise ValueError("scale must be finite")

    def weights(self, channels):
        rng = np.random.default_rng([self.seed, channels])
        return rng.standard_normal((channels, channels)) / np.sqrt(channels)

    def __call__(self, f):
        f = np.asarray(f, dtype=np.float64)
        if self.kind == "identity":
            return f.copy()
        if self.kind == "zero":
            return np.zeros_like(f)
        mixed = np.einsum("dc,chw->dhw", self.weights(f.shape[0]), f)
        return f + self.scale * np.tanh(mixed)


def as_operator(op):
    if isinstance(op, LatentOperator):
        return op
    if isinstance(op, str):
        return LatentOperator(op)
    raise TypeError(f"expected LatentOperator or kind string, got {type(op).__name__}")


def manipulate(fa, fb, alpha, m=LatentOperator()):
    """``fa + M(alpha * (fb - fa))``.

    With the identity operator this is evaluated as ``(1 - alpha) * fa +
    alpha * fb``, which returns ``fb`` exactly at ``alpha == 1``.
    """
    fa, fb = _features(fa, "fa"), _features(fb, "fb")
    check_same_shape(fa, fb, ("fa", "fb"))
    m = as_operator(m)
    alpha = float(alpha)
    if m.kind == "identity":
        return (1.0 - alpha) * fa + alpha * fb
    return fa + m(alpha * (fb - fa))


def static_refine(fah, fbh, s=LatentOperator()):
    """Subtractive refinement ``fah - S(fah - fbh)``; identity ``S`` yields ``fbh``."""
    fah, fbh = _features(fah, "fah"), _features(fbh, "fbh")
    check_same_shape(fah, fbh, ("fah", "fbh"))
    s = as_operator(s)
    if s.kind == "identity":
        return fbh.copy()
    return fah - s(fah - fbh)


def fuse(zu, fsr, d=LatentOperator()):
    """Decoder applied to the sum of upsampled motion and refined static features."""
    zu, fsr = _features(zu, "zu"), _features(fsr, "fsr")
    check_same_shape(zu, fsr, ("zu", "fsr"))
    return as_operator(d)(zu + fsr)


# -- selective scan ----------------------------------------------------------


@dataclass(frozen=True)
class ScanParams:
    """Diagonal selective SSM over D channels with N states per channel.

    ``A`` (D, N) holds continuous-time decays. Per step, the gate
    ``delta = softplus(x @ W_delta + b_delta)`` (D,), and the input and
    output projections ``B = x @ W_B + b_B``, ``C = x @ W_C + b_C`` (N,) are
    computed from the current input. Zero ``W_*`` matrices give a
    time-invariant (non-selective) scan.
    """

    A: np.ndarray
    W_delta: np.ndarray
    b_delta: np.ndarray
    W_B: np.ndarray
    b_B: np.ndarray
    W_C: np.ndarray
    b_C: np.ndarray

    def __post_init__(self):
        d, n = np.shape(self.A)
        expected = {
            "W_delta": (d, d), "b_delta": (d,), "W_B": (d, n), "b_B": (n,), "W_C": (d, n), "b_C": (n,),
        }
        for f in fields(self):
            arr = np.asarray(getattr(self, f.name), dtype=np.float64)
            if f.name != "A" and arr.shape != expected[f.name]:
                raise ValueError(f"{f.name} must have shape {expected[f.name]}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{f.name} contains non-finite values")
            object.__setattr__(self, f.name, arr)

    @property
    def channels(self):
        return self.A.shape[0]

    @property
    def state_dim(self):
        return self.A.shape[1]

    @classmethod
    def random(cls, channels, state_dim=4, seed=0, scale=0.5):
        rng = np.random.default_rng(seed)
        return cls(
            A=-np.exp(rng.uniform(np.log(0.1), np.log(2.0), (channels, state_dim))),
            W_delta=scale * rng.standard_normal((channels, channels)) / np.sqrt(channels),
            b_delta=rng.uniform(-1.0, 0.5, channels),
            W_B=scale * rng.standard_normal((channels, state_dim)) / np.sqrt(channels),
            b_B=rng.standard_normal(state_dim),
            W_C=scale * rng.standard_normal((channels, state_dim)) / np.sqrt(channels),
            b_C=rng.standard_normal(state_dim),
        )

    def map(self, fn, other=None):
        """Apply ``fn`` fieldwise (to pairs of fields when ``other`` is given)."""
        vals = {
            f.name: fn(getattr(self, f.name)) if other is None
            else fn(getattr(self, f.name), getattr(other, f.name))
            for f in fields(self)
        }
        return replace(self, **vals)


def softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _sequence(x, p):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] != p.channels:
        raise ValueError(f"x must have shape (L>=1, {p.channels}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite values")
    return x


def scan_terms(x, p):
    """Per-step gate, projections, decay and input drive of the recurrence."""
    z = x @ p.W_delta + p.b_delta
    delta = softplus(z)
    b = x @ p.W_B + p.b_B
    c = x @ p.W_C + p.b_C
    decay = np.exp(delta[:, :, None] * p.A[None])
    drive = (delta * x)[:, :, None] * b[:, None, :]
    return z, delta, b, c, decay, drive


def _recur(decay, drive):
    # h_t = decay_t * h_{t-1} + drive_t with h_0 = 0; single left-to-right pass.
    states = np.empty_like(drive)
    h = np.zeros(drive.shape[1:])
    for t in range(drive.shape[0]):
        h = decay[t] * h + drive[t]
        states[t] = h
    return states


def selective_scan_1d(x, p):
    """Zero-order-hold selective scan of a sequence ``x`` of shape (L, D).

    ``h_t = exp(delta_t * A) * h_{t-1} + (delta_t * B_t) * x_t`` and
    ``y_t = C_t . h_t`` per channel, starting from ``h_0 = 0``.
    """
    x = _sequence(x, p)
    _, _, _, c, decay, drive = scan_terms(x, p)
    states = _recur(decay, drive)
    return np.einsum("ldn,ln->ld", states, c)


def scan_jvp(x, p, dx, dp):
    """Forward-mode derivative of :func:`selective_scan_1d` along ``(dx, dp)``.

    ``dp`` is a :class:`ScanParams` holding the parameter tangent.
    """
    x = _sequence(x, p)
    dx = np.asarray(dx, dtype=np.float64)
    check_same_shape(x, dx, ("x", "dx"))
    z, delta, b, c, decay, drive = scan_terms(x, p)

    dz = dx @ p.W_delta + x @ dp.W_delta + dp.b_delta
    ddelta = _sigmoid(z) * dz
    db = dx @ p.W_B + x @ dp.W_B + dp.b_B
    dc = dx @ p.W_C + x @ dp.W_C + dp.b_C
    ddecay = decay * (ddelta[:, :, None] * p.A[None] + delta[:, :, None] * dp.A[None])
    ddrive = (ddelta * x + delta * dx)[:, :, None] * b[:, None, :] + (delta * x)[:, :, None] * db[:, None, :]

    states = _recur(decay, drive)
    prev = np.concatenate([np.zeros((1,) + states.shape[1:]), states[:-1]])
    dstates = _recur(decay, ddecay * prev + ddrive)
    return np.einsum("ldn,ln->ld", dstates, c) + np.einsum("ldn,ln->ld", states, dc)


def selective_scan_2d(f, p):
    """Mean of four directional scans over a (C, h, w) feature map.

    Directions are row-major forward/backward and column-major
    forward/backward; the same parameters serve every direction.
    """
    f = _features(f, "f")
    c, h, w = f.shape
    rows = f.reshape(c, h * w).T
    cols = f.transpose(0, 2, 1).reshape(c, w * h).T
    row_fwd = selective_scan_1d(rows, p)
    row_bwd = selective_scan_1d(rows[::-1], p)[::-1]
    col_fwd = selective_scan_1d(cols, p)
    col_bwd = selective_scan_1d(cols[::-1], p)[::-1]
    as_map_r = lambda y: y.T.reshape(c, h, w)  # noqa: E731
    as_map_c = lambda y: y.T.reshape(c, w, h).transpose(0, 2, 1)  # noqa: E731
    # Pairwise grouping keeps the reduction symmetric under transposition.
    total = (as_map_r(row_fwd) + as_map_r(row_bwd)) + (as_map_c(col_fwd) + as_map_c(col_bwd))
    return total / 4.0


# -- feature pyramid helpers -------------------------------------------------


def pool_features(f, factor):
    """Block-average downsampling; edges are replicated up to a multiple of ``factor``."""
    if factor == 1:
        return f.copy()
    c, h, w = f.shape
    ph, pw = -h % factor, -w % factor
    f = np.pad(f, ((0, 0), (0, ph), (0, pw)), mode="edge")
    return f.reshape(c, f.shape[1] // factor, factor, f.shape[2] // factor, factor).mean(axis=(2, 4))


def upsample_features(f, factor, size):
    """Nearest-neighbour upsampling cropped to ``size`` (h, w)."""
    if factor == 1:
        return f[:, : size[0], : size[1]].copy()
    up = np.repeat(np.repeat(f, factor, axis=1), factor, axis=2)
    return up[:, : size[0], : size[1]]


def magnify_pair(frame_a, frame_b, alpha, manipulator="identity", refiner="identity",
                 decoder="identity", scan=None, down_factor=1):
    """Run the manipulate -> scan -> refine -> fuse chain on two (H, W, C) frames.

    Deep features are the block-averaged frames; the static branch receives
    the detail the block average removes, so with ``down_factor == 1`` it is
    empty. ``scan=None`` passes the manipulated features through unchanged.
    """
    fa_h = np.moveaxis(np.asarray(frame_a, dtype=np.float64), -1, 0)
    fb_h = np.moveaxis(np.asarray(frame_b, dtype=np.float64), -1, 0)
    check_same_shape(fa_h, fb_h, ("frame_a", "frame_b"))
    size = fa_h.shape[1:]
    fa_e = pool_features(fa_h, down_factor)
    fb_e = pool_features(fb_h, down_factor)

    manipulated = manipulate(fa_e, fb_e, alpha, manipulator)
    z = manipulated if scan is None else selective_scan_2d(manipulated, scan)
    zu = upsample_features(z, down_factor, size)

    detail_a = fa_h - upsample_features(fa_e, down_factor, size)
    detail_b = fb_h - upsample_features(fb_e, down_factor, size)
    refined = static_refine(detail_a, detail_b, refiner)
    return np.moveaxis(fuse(zu, refined, decoder), 0, -1)


class LatentMagnifier(TransformerMixin, BaseEstimator):
    """Transformer that magnifies frame pairs with the untrained latent chain.

    ``X`` is a pair stack of shape (2, H, W, C) or a batch (N, 2, H, W, C);
    ``transform`` returns the magnified frame(s) (H, W, C) or (N, H, W, C).
    ``scan_seed`` selects a random selective-scan refinement; ``None``
    disables it.
    """

    def __init__(self, alpha=2.0, manipulator="identity", refiner="identity", decoder="identity",
                 scan_seed=None, state_dim=4, down_factor=1):
        self.alpha = alpha
        self.manipulator = manipulator
        self.refiner = refiner
        self.decoder = decoder
        self.scan_seed = scan_seed
        self.state_dim = state_dim
        self.down_factor = down_factor

    def fit(self, X, y=None):
        X = self._check_pairs(X)
        if int(self.down_factor) != self.down_factor or self.down_factor < 1:
            raise ValueError("down_factor must be an integer >= 1")
        channels = X.shape[-1]
        self.n_channels_ = channels
        self.scan_params_ = (
            None if self.scan_seed is None
            else ScanParams.random(channels, self.state_dim, seed=self.scan_seed)
        )
        return self

    @staticmethod
    def _check_pairs(X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim not in (4, 5) or X.shape[-4] != 2:
            raise ValueError(f"expected (2, H, W, C) or (N, 2, H, W, C), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        return X

    def transform(self, X):
        check_is_fitted(self, "n_channels_")
        X = self._check_pairs(X)
        single = X.ndim == 4
        pairs = X[None] if single else X
        out = np.stack([
            magnify_pair(a, b, self.alpha, self.manipulator, self.refiner, self.decoder,
                         self.scan_params_, int(self.down_factor))
            for a, b in pairs
        ])
        return out[0] if single else out
