"""Dataset generation: configuration, per-sample scene synthesis and manifests.

Every sample draws from a seed sequence keyed by ``(global_seed, index,
attempt)``, so outputs do not depend on worker count or scheduling.
"""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import __version__
from . import core_image as ci
from ._validation import ConfigurationError, check_range
from .assets import PrepConfig, align_foreground, load_catalog, prepare_background, procedural_catalog
from .compositor import DEFAULT_IOU_CAP, FRAMES, SceneRejected, composite, place_objects, warp_object
from .kinematics import (
    DEFAULT_ALPHA_RANGE,
    DEFAULT_MIXTURE,
    IDENTITY,
    MotionDraw,
    RigidTransform,
    check_constraints,
    interpolate_transform,
    sample_alpha,
    sample_motion,
)
from .magnifier_kernel import ScanParams, magnify_pair
from .sensor import DegradationParams, clean_ground_truth, degrade_input, pre_quantization

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_SCENE_ATTEMPTS = 5
MAX_ASSET_REDRAWS = 10
SUCCESS_FRACTION = 0.99
IMAGE_FILES = {"A": "I_A.png", "B": "I_B.png", "amp": "I_amp.png"}
DEBUG_FILES = (
    "J_A.png", "J_B.png", "J_amp.png", "overlay.png", "LR_A_16bit.png", "LR_B_16bit.png", "LR_amp_16bit.png",
)
OUTLINE_RGB = (255, 140, 0)
DEMO_DOWN_FACTOR = 1


@dataclass
class GenerationConfig:
    """All knobs of dataset generation.

    Assets come from ``bg_dir``/``fg_dir`` when both are set, otherwise from
    the procedural generator seeded with ``asset_seed``.
    """

    n_samples: int = 100
    lr_size: tuple = (384, 384)
    scale: int = 2
    alpha_range: tuple = DEFAULT_ALPHA_RANGE
    mixture: tuple = DEFAULT_MIXTURE
    object_count: tuple = (8, 12)
    shot_gain_range: tuple = (500.0, 5000.0)
    read_sigma_range: tuple = (0.001, 0.005)
    noise: bool = True
    iou_cap: float = DEFAULT_IOU_CAP
    seed: int = 0
    workers: int = 1
    bg_dir: str = None
    fg_dir: str = None
    asset_seed: int = 0
    n_backgrounds: int = 16
    n_foregrounds: int = 64
    prep: PrepConfig = field(default_factory=PrepConfig)

    def __post_init__(self):
        if isinstance(self.prep, dict):
            self.prep = PrepConfig(**{k: tuple(v) for k, v in self.prep.items()})
        for name in ("lr_size", "alpha_range", "mixture", "object_count", "shot_gain_range", "read_sigma_range"):
            setattr(self, name, tuple(getattr(self, name)))
        if int(self.n_samples) < 1:
            raise ConfigurationError("n_samples must be >= 1")
        if len(self.lr_size) != 2 or min(self.lr_size) < 1:
            raise ConfigurationError(f"lr_size must be (H, W) >= 1, got {self.lr_size}")
        if int(self.scale) != self.scale or self.scale < 1:
            raise ConfigurationError("scale must be an integer >= 1")
        check_range(self.alpha_range, "alpha_range", lo_bound=1.0)
        p = np.asarray(self.mixture, dtype=np.float64)
        if p.shape != (3,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ConfigurationError(f"mixture must be 3 weights summing to 1, got {self.mixture}")
        lo, hi = check_range(self.object_count, "object_count", lo_bound=1)
        if hi > 64 or lo != int(lo) or hi != int(hi):
            raise ConfigurationError("object_count must be integers within [1, 64]")
        check_range(self.shot_gain_range, "shot_gain_range")
        if self.shot_gain_range[0] <= 0:
            raise ConfigurationError("shot_gain_range must be positive")
        check_range(self.read_sigma_range, "read_sigma_range", lo_bound=0.0)
        if int(self.workers) < 1:
            raise ConfigurationError("workers must be >= 1")
        if (self.bg_dir is None) != (self.fg_dir is None):
            raise ConfigurationError("bg_dir and fg_dir must be given together")

    @property
    def hr_size(self):
        return (self.lr_size[0] * self.scale, self.lr_size[1] * self.scale)

    def to_dict(self, include_runtime=True):
        d = asdict(self)
        d["prep"] = asdict(self.prep)
        if not include_runtime:
            d.pop("workers")
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def catalog(self):
        if self.bg_dir is not None:
            return load_catalog(self.bg_dir, self.fg_dir)
        return procedural_catalog(self.asset_seed, self.n_backgrounds, self.n_foregrounds, self.lr_size)


def load_config(path):
    with open(path) as fh:
        return GenerationConfig.from_dict(json.load(fh))


def scene_seed(global_seed, index, attempt=0):
    """64-bit seed derived from ``(global_seed, index, attempt)``."""
    ss = np.random.SeedSequence([int(global_seed), int(index), int(attempt)])
    return int(ss.generate_state(1, np.uint64)[0])


_STREAMS = ("scene", "background", "objects", "motion", "placement", "noise_A", "noise_B")


def _streams(seed):
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(_STREAMS, children)}


@dataclass
class Scene:
    index: int
    attempt: int
    seed: int
    alpha: float
    background_id: str
    background: np.ndarray
    placed: list
    n_requested: int
    params: DegradationParams
    composites: dict


def synthesize_scene(cfg, catalog, index, attempt=0):
    """Stage I for one sample: assets, motions, placement and HR composites.

    Raises SceneRejected when no object can be placed.
    """
    seed = scene_seed(cfg.seed, index, attempt)
    rng = _streams(seed)
    lo, hi = (int(v) for v in cfg.object_count)
    n_obj = int(rng["scene"].integers(lo, hi + 1))
    bg_index = int(rng["scene"].integers(len(catalog.backgrounds)))

    bg = prepare_background(catalog.background(bg_index), cfg.scale, rng["background"],
                            lr_size=cfg.lr_size, config=cfg.prep)

    alpha = sample_alpha(rng["motion"], cfg.alpha_range)
    draws = [sample_motion(rng["motion"], alpha, cfg.mixture) for _ in range(n_obj)]

    objs = []
    for _ in range(n_obj):
        for _ in range(MAX_ASSET_REDRAWS):
            fg_index = int(rng["objects"].integers(len(catalog.foregrounds)))
            try:
                objs.append(align_foreground(catalog.load_object(fg_index), bg, rng["objects"], cfg.prep))
                break
            except ValueError as exc:
                logger.info("asset %d rejected: %s", fg_index, exc)
        else:
            raise SceneRejected("could not draw a usable foreground asset")

    placed = place_objects(bg, objs, draws, rng["placement"], iou_cap=cfg.iou_cap)
    composites = {frame: composite(bg, placed, frame) for frame in FRAMES}

    if cfg.noise:
        params = DegradationParams(
            shot_gain=float(rng["scene"].uniform(*cfg.shot_gain_range)),
            read_sigma=float(rng["scene"].uniform(*cfg.read_sigma_range)),
            down_factor=cfg.scale,
            seed=seed,
        )
    else:
        params = DegradationParams(shot_gain=math.inf, read_sigma=0.0, down_factor=cfg.scale, seed=seed)
    return Scene(index, attempt, seed, alpha, catalog.background_id(bg_index), bg, placed, n_obj,
                 params, composites)


def render_scene(scene):
    """Stage II: noisy observed pair and the clean magnified ground truth."""
    rng = _streams(scene.seed)
    return {
        "A": degrade_input(scene.composites["A"], scene.params, rng["noise_A"]),
        "B": degrade_input(scene.composites["B"], scene.params, rng["noise_B"]),
        "amp": clean_ground_truth(scene.composites["amp"], scene.params),
    }


def build_scene(cfg, catalog, index):
    """Synthesize sample ``index``, resampling rejected scenes with new seeds."""
    last = None
    for attempt in range(MAX_SCENE_ATTEMPTS):
        try:
            return synthesize_scene(cfg, catalog, index, attempt)
        except SceneRejected as exc:
            logger.warning("sample %d attempt %d rejected: %s", index, attempt, exc)
            last = exc
    raise SceneRejected(f"sample {index} rejected after {MAX_SCENE_ATTEMPTS} attempts: {last}")


def sample_dir_name(index):
    return f"{index:06d}"


def scene_record(scene):
    objects = []
    for p in scene.placed:
        objects.append({
            "asset_id": p.object.asset_id,
            "anchor": [int(p.anchor[0]), int(p.anchor[1])],
            "pivot": [p.object.pivot[0], p.object.pivot[1]],
            "kind": p.kind,
            "T_A": p.transforms["A"].to_dict(),
            "T_B": p.transforms["B"].to_dict(),
            "T_amp": p.transforms["amp"].to_dict(),
        })
    name = sample_dir_name(scene.index)
    return {
        "index": scene.index,
        "attempt": scene.attempt,
        "scene_seed": scene.seed,
        "alpha": scene.alpha,
        "background_id": scene.background_id,
        "n_objects_requested": scene.n_requested,
        "n_objects_placed": len(scene.placed),
        "object_shortfall": len(scene.placed) < scene.n_requested,
        "objects": objects,
        "degradation": scene.params.to_dict(),
        "files": {k: f"{name}/{v}" for k, v in IMAGE_FILES.items()},
    }


def _produce(job):
    cfg, catalog, index, out_dir = job
    try:
        scene = build_scene(cfg, catalog, index)
        images = render_scene(scene)
        sample_dir = Path(out_dir) / sample_dir_name(index)
        sample_dir.mkdir(parents=True, exist_ok=True)
        for frame, fname in IMAGE_FILES.items():
            ci.write_png(sample_dir / fname, images[frame])
        return scene_record(scene), None
    except (SceneRejected, OSError) as exc:
        return None, {"index": index, "error": str(exc)}


def generate(cfg, out_dir, workers=None):
    """Write every sample's PNG triplet plus ``manifest.json`` into ``out_dir``.

    Returns the manifest dict. Failed samples are listed under ``failures``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    catalog = cfg.catalog()
    workers = int(workers or cfg.workers)
    jobs = [(cfg, catalog, i, str(out_dir)) for i in range(int(cfg.n_samples))]
    if workers == 1:
        results = [_produce(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_produce, jobs, chunksize=max(1, len(jobs) // (4 * workers))))

    samples = sorted((r for r, _ in results if r is not None), key=lambda r: r["index"])
    failures = sorted((f for _, f in results if f is not None), key=lambda f: f["index"])
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "pipeline_version": __version__,
        "config": cfg.to_dict(include_runtime=False),
        "n_requested": int(cfg.n_samples),
        "n_produced": len(samples),
        "samples": samples,
        "failures": failures,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def generation_succeeded(manifest):
    return manifest["n_produced"] >= SUCCESS_FRACTION * manifest["n_requested"]


def validate_manifest(manifest, root=None):
    """List of problems: constraint violations, inconsistent T_amp, missing files."""
    problems = []
    for s in manifest["samples"]:
        alpha = s["alpha"]
        for k, o in enumerate(s["objects"]):
            t_b = RigidTransform.from_dict(o["T_B"])
            t_amp = RigidTransform.from_dict(o["T_amp"])
            if RigidTransform.from_dict(o["T_A"]) != IDENTITY:
                problems.append(f"sample {s['index']} object {k}: T_A is not the reference pose")
            if not check_constraints(MotionDraw(o["kind"], t_b, alpha, t_amp)):
                problems.append(f"sample {s['index']} object {k}: motion bounds violated")
            if interpolate_transform(IDENTITY, t_b, alpha) != t_amp:
                problems.append(f"sample {s['index']} object {k}: T_amp != alpha * T_B")
        if root is not None:
            for rel in s["files"].values():
                if not (Path(root) / rel).exists():
                    problems.append(f"sample {s['index']}: missing {rel}")
    return problems


# -- diagnostics -------------------------------------------------------------


def outline_mask(scene, frame):
    """Boolean HR raster marking the boundaries of every object footprint."""
    hw = scene.background.shape[:2]
    out = np.zeros(hw, dtype=bool)
    for p in scene.placed:
        _, mask = warp_object(p.object, p.transforms[frame], p.anchor, hw)
        fp = mask > 0.5
        out |= fp & ~ndimage.binary_erosion(fp)
    return out


def preview(linear):
    return ci.quantize(ci.linear_to_srgb(linear))


def debug_sample(cfg, index, out_dir):
    """Write the diagnostic bundle for sample ``index``; returns the file paths.

    Bundle: sRGB previews of the three HR composites, the frame-B preview
    with reference-pose outlines drawn in orange, and the pre-quantization
    LR frames as 16-bit PNGs.
    """
    if not 0 <= index < cfg.n_samples:
        raise IndexError(f"index {index} out of range for {cfg.n_samples} samples")
    scene = build_scene(cfg, cfg.catalog(), index)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = _streams(scene.seed)
    paths = []
    for frame in FRAMES:
        path = out_dir / f"J_{frame}.png"
        ci.write_png(path, preview(scene.composites[frame]))
        paths.append(path)

    overlay = preview(scene.composites["B"])
    overlay[outline_mask(scene, "A")] = OUTLINE_RGB
    ci.write_png(out_dir / "overlay.png", overlay)
    paths.append(out_dir / "overlay.png")

    lr = {
        "A": pre_quantization(scene.composites["A"], scene.params, rng["noise_A"]),
        "B": pre_quantization(scene.composites["B"], scene.params, rng["noise_B"]),
        "amp": pre_quantization(scene.composites["amp"], scene.params),
    }
    for frame in FRAMES:
        path = out_dir / f"LR_{frame}_16bit.png"
        ci.write_png16(path, lr[frame])
        paths.append(path)
    return paths, scene


def kernel_demo(pair_dir, alpha, out_path=None, down_factor=DEMO_DOWN_FACTOR, scan_seed=None,
                manipulator="identity", refiner="identity", decoder="identity"):
    """Magnify the ``I_A``/``I_B`` pair in ``pair_dir`` with the latent chain.

    Frames are processed as decoded sRGB values. By default there is no
    down/up path, so identity operators reduce the chain to
    ``(1 - alpha) * A + alpha * B``. With ``down_factor > 1`` deep features
    are block averages and the static branch carries the residual detail of
    B. The result is clipped, quantized and written to ``out_path`` (default
    ``pair_dir/I_demo.png``).
    """
    pair_dir = Path(pair_dir)
    paths = [pair_dir / IMAGE_FILES["A"], pair_dir / IMAGE_FILES["B"]]
    for p in paths:
        if not p.exists():
            raise FileNotFoundError(f"missing input frame {p}")
    frame_a, frame_b = (ci.dequantize(ci.read_codes(p)) for p in paths)
    scan = None if scan_seed is None else ScanParams.random(3, seed=scan_seed)
    out = magnify_pair(frame_a, frame_b, alpha, manipulator, refiner, decoder, scan, down_factor)
    codes = ci.quantize(np.clip(out, 0.0, 1.0))
    out_path = Path(out_path) if out_path is not None else pair_dir / "I_demo.png"
    ci.write_png(out_path, codes)
    return codes, out_path
