import numpy as np
import pytest

from pitchreg import (
    PtzGrid,
    build_dictionary,
    standard_pitch,
    symmetric_steps,
    synthetic_seed_annotations,
)


@pytest.fixture(scope="session")
def model():
    return standard_pitch(10.0)


@pytest.fixture(scope="session")
def seeds(model):
    return synthetic_seed_annotations(3, rng_seed=7, model=model)


@pytest.fixture(scope="session")
def small_grid():
    return PtzGrid(
        pan_steps=symmetric_steps(0.12, 5),
        tilt_steps=symmetric_steps(4.0, 3),
        zoom_factors=(0.85, 1.0, 1.2),
    )


@pytest.fixture(scope="session")
def small_dictionary(seeds, small_grid, model):
    return build_dictionary(seeds, small_grid, model)


def random_convex_quad(rng, scale=50.0, center_spread=60.0):
    """Random convex CCW quad: four angle-sorted points on a noisy circle."""
    while True:
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=4))
        if np.min(np.diff(angles, append=angles[0] + 2.0 * np.pi)) < 0.3:
            continue
        radii = rng.uniform(0.4 * scale, scale, size=4)
        center = rng.uniform(-center_spread, center_spread, size=2)
        quad = center + np.column_stack(
            [radii * np.cos(angles), radii * np.sin(angles)]
        )
        from pitchreg.geometry import is_convex_ccw, polygon_area

        if is_convex_ccw(quad) and polygon_area(quad) > 1.0:
            return quad
