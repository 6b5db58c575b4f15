"""Shared fixtures and deterministic hypothesis settings."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "hgm",
    derandomize=True,
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("hgm")


def random_bits(num_points: int, seed: int) -> np.ndarray:
    """Deterministic random truth table for fixture functions."""
    return np.random.default_rng(seed).integers(0, 2, size=num_points).astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
