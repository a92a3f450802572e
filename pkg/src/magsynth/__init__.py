"""Synthetic motion-magnification triplets and a reference latent magnification kernel."""

__version__ = "0.1.0"

from .compositor import PlacedObject, composite, place_objects, warp_object
from .kinematics import MotionDraw, RigidTransform, check_constraints, sample_alpha, sample_motion
from .magnifier_kernel import LatentMagnifier, LatentOperator, ScanParams
from .metrics import psnr, rmse
from .pipeline import GenerationConfig, debug_sample, generate, kernel_demo
from .sensor import DegradationParams, SensorDegradation

__all__ = [
    "DegradationParams",
    "GenerationConfig",
    "LatentMagnifier",
    "LatentOperator",
    "MotionDraw",
    "PlacedObject",
    "RigidTransform",
    "ScanParams",
    "SensorDegradation",
    "check_constraints",
    "composite",
    "debug_sample",
    "generate",
    "kernel_demo",
    "place_objects",
    "psnr",
    "rmse",
    "sample_alpha",
    "sample_motion",
    "warp_object",
]
