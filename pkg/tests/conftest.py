import numpy as np
import pytest

from magsynth.assets import ForegroundObject
from magsynth.pipeline import GenerationConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    """Production-shaped config on a small canvas for fast end-to-end tests."""
    return GenerationConfig(n_samples=3, lr_size=(96, 96), object_count=(2, 4), seed=5, n_foregrounds=12, n_backgrounds=3,
                            prep={"fg_area_fraction": (0.01, 0.03), "bg_blur_sigma": (0.3, 1.0),
                                  "bg_noise_sigma": (0.002, 0.01), "fg_blur_sigma": (0.3, 1.0)})


def square_object(size=9, value=0.5, image=None):
    mask = np.ones((size, size))
    if image is None:
        image = np.full((size, size, 3), value)
    return ForegroundObject(image, mask)
