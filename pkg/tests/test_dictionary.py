import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pitchreg.dictionary import (
    Dictionary,
    PtzGrid,
    SeedAnnotation,
    build_dictionary,
    entry_from_quad,
    geometric_zooms,
    read_seed_file,
    seed_quad,
    simulate_pan,
    simulate_tilt,
    simulate_zoom,
    symmetric_steps,
    write_seed_file,
)
from pitchreg.errors import DegenerateQuad, NoValidEntries, ParallelSides
from pitchreg.features import HogConfig, hog
from pitchreg.geometry import (
    apply_homography,
    convergence_point,
    invert_homography,
    polygon_area,
    rect_quad,
)


@pytest.fixture()
def trapezoid():
    # Symmetric camera-like trapezoid with convergence point at (50, -30).
    return np.array(
        [[35.0, 10.0], [65.0, 10.0], [80.0, 50.0], [20.0, 50.0]]
    )


class TestSimulatePan:
    def test_zero_is_identity(self, trapezoid):
        assert np.allclose(simulate_pan(trapezoid, 0.0), trapezoid)

    def test_inverse(self, trapezoid):
        q = simulate_pan(simulate_pan(trapezoid, 0.1), -0.1)
        assert np.abs(q - trapezoid).max() < 1e-9

    def test_matches_rotation_about_c_oracle(self, trapezoid):
        delta = 0.1
        c = convergence_point(trapezoid)
        got = simulate_pan(trapezoid, delta)
        for corner, moved in zip(trapezoid, got):
            dx, dy = corner - c
            expected = c + np.array(
                [
                    dx * math.cos(delta) - dy * math.sin(delta),
                    dx * math.sin(delta) + dy * math.cos(delta),
                ]
            )
            assert np.abs(moved - expected).max() < 1e-9

    def test_parallel_sides(self):
        rect = np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]])
        with pytest.raises(ParallelSides):
            simulate_pan(rect, 0.1)


class TestSimulateTilt:
    def test_zero_is_identity(self, trapezoid):
        assert np.allclose(simulate_tilt(trapezoid, 0.0), trapezoid)

    def test_inverse(self, trapezoid):
        q = simulate_tilt(simulate_tilt(trapezoid, 5.0), -5.0)
        assert np.abs(q - trapezoid).max() < 1e-9

    def test_distance_to_c_grows_by_exactly_d(self, trapezoid):
        d = 3.0
        c = convergence_point(trapezoid)
        moved = simulate_tilt(trapezoid, d)
        before = np.linalg.norm(trapezoid - c, axis=1)
        after = np.linalg.norm(moved - c, axis=1)
        assert np.abs(after - before - d).max() < 1e-9

    def test_crossing_c_raises(self, trapezoid):
        c = convergence_point(trapezoid)
        near_dist = np.linalg.norm(trapezoid[0] - c)
        with pytest.raises(DegenerateQuad):
            simulate_tilt(trapezoid, -(near_dist + 1.0))


class TestSimulateZoom:
    def test_identity(self, trapezoid):
        assert np.allclose(simulate_zoom(trapezoid, 1.0), trapezoid)

    def test_area_scales_quadratically(self, trapezoid):
        out = simulate_zoom(trapezoid, 2.0)
        assert abs(polygon_area(out) - 4.0 * polygon_area(trapezoid)) < 1e-9

    def test_group_inverse(self, trapezoid):
        q = simulate_zoom(simulate_zoom(trapezoid, 2.0), 0.5)
        assert np.abs(q - trapezoid).max() < 1e-9

    def test_out_of_range_factor(self, trapezoid):
        with pytest.raises(ValueError):
            simulate_zoom(trapezoid, 0.1)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.25, 4.0))
    def test_inverse_property(self, factor):
        trapezoid = np.array([[35.0, 10.0], [65.0, 10.0], [80.0, 50.0], [20.0, 50.0]])
        q = simulate_zoom(simulate_zoom(trapezoid, factor), 1.0 / factor)
        assert np.abs(q - trapezoid).max() < 1e-9


class TestEntryFromQuad:
    def test_reproduces_seed_homography(self, model, seeds):
        seed = seeds[0]
        quad = seed_quad(seed, (256, 144))
        entry = entry_from_quad(quad, model)
        assert np.abs(entry.h - seed.homography()).max() < 1e-8

    def test_quad_outside_model_rejected(self, model, trapezoid):
        far = trapezoid + np.array([0.0, 500.0])
        assert entry_from_quad(far, model) is None

    def test_random_ptz_perturbations_accepted(self, model):
        from pitchreg.temporal import CameraParams, camera_to_quad

        rng = np.random.default_rng(51)
        # A line-rich centered view so every modest perturbation stays visible.
        base = camera_to_quad(
            CameraParams(52.5, -30.0, np.pi / 2.0, 0.45, 35.0, 85.0)
        )
        hs = []
        for _ in range(100):
            q = simulate_pan(base, rng.uniform(-0.1, 0.1))
            q = simulate_tilt(q, rng.uniform(-4.0, 4.0))
            q = simulate_zoom(q, rng.uniform(0.85, 1.2))
            entry = entry_from_quad(q, model)
            assert entry is not None
            hs.append(entry.h)
        hs = np.stack(hs)
        assert len(np.unique(hs.round(9), axis=0)) == 100


class TestGrids:
    def test_symmetric_steps_contains_zero(self):
        steps = symmetric_steps(0.35, 21)
        assert len(steps) == 21
        assert 0.0 in steps
        with pytest.raises(ValueError):
            symmetric_steps(0.35, 20)

    def test_geometric_zooms_contains_one(self):
        zooms = geometric_zooms(1.07, 11)
        assert len(zooms) == 11
        assert 1.0 in zooms

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            PtzGrid((0.1,), (0.0,), (1.0,))
        with pytest.raises(ValueError):
            PtzGrid((), (0.0,), (1.0,))
        grid = PtzGrid.default()
        assert len(grid) == 21 * 9 * 5


class TestBuildDictionary:
    def test_identity_grid_single_entry(self, model, seeds):
        grid = PtzGrid((0.0,), (0.0,), (1.0,))
        dct = build_dictionary(seeds[:1], grid, model)
        assert len(dct) == 1
        assert np.abs(dct.homographies[0] - seeds[0].homography()).max() < 1e-8

    def test_count_bounded_by_grid_product(self, small_dictionary, seeds, small_grid):
        assert len(small_dictionary) <= len(seeds) * len(small_grid)
        assert len(small_dictionary) > 0

    def test_entry_invariants(self, small_dictionary):
        dct = small_dictionary
        w, h = dct.raster_size
        rect = rect_quad(float(w), float(h))
        for i in range(0, len(dct), 7):
            entry = dct.entry(i)
            assert entry.edges.sum() >= 50
            # hog matches recomputation bit-exactly
            assert np.array_equal(entry.hog, hog(entry.edges, dct.hog_config))
            # quad reprojects through h^-1 onto the image-corner rectangle
            back = apply_homography(invert_homography(entry.h), entry.quad)
            assert np.abs(back - rect).max() < 1e-6

    def test_deterministic_and_parallel_identical(self, model, seeds):
        grid = PtzGrid(
            symmetric_steps(0.06, 3), symmetric_steps(2.0, 3), (0.9, 1.0, 1.1)
        )
        a = build_dictionary(seeds, grid, model)
        b = build_dictionary(seeds, grid, model)
        c = build_dictionary(seeds, grid, model, n_jobs=2)
        assert a.fingerprint() == b.fingerprint() == c.fingerprint()

    def test_no_seeds(self, model):
        with pytest.raises(NoValidEntries):
            build_dictionary([], PtzGrid((0.0,), (0.0,), (1.0,)), model)


class TestPersistence:
    def test_save_load_round_trip(self, small_dictionary, tmp_path):
        path = tmp_path / "dict.ptvd"
        small_dictionary.save(str(path))
        loaded = Dictionary.load(str(path))
        assert loaded.raster_size == small_dictionary.raster_size
        assert loaded.hog_config == small_dictionary.hog_config
        assert np.array_equal(loaded.homographies, small_dictionary.homographies)
        assert np.array_equal(loaded.cams, small_dictionary.cams)
        assert np.array_equal(loaded.hog_matrix, small_dictionary.hog_matrix)
        assert np.array_equal(loaded.packed_edges, small_dictionary.packed_edges)
        assert np.array_equal(loaded.h_scales, small_dictionary.h_scales)
        assert loaded.fingerprint() == small_dictionary.fingerprint()

    def test_save_is_byte_deterministic(self, small_dictionary, tmp_path):
        p1, p2 = tmp_path / "a.ptvd", tmp_path / "b.ptvd"
        small_dictionary.save(str(p1))
        small_dictionary.save(str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ptvd"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError):
            Dictionary.load(str(path))


class TestSeedFiles:
    def test_round_trip(self, seeds, tmp_path):
        path = tmp_path / "seeds.txt"
        write_seed_file(str(path), seeds)
        loaded = read_seed_file(str(path))
        assert [s.image_id for s in loaded] == [s.image_id for s in seeds]
        for a, b in zip(loaded, seeds):
            assert np.array_equal(a.image_points, b.image_points)
            assert np.array_equal(a.model_points, b.model_points)

    def test_bad_line(self, tmp_path):
        path = tmp_path / "seeds.txt"
        path.write_text("frame0 1 2 3\n")
        with pytest.raises(ValueError):
            read_seed_file(str(path))

    def test_annotation_shape_validated(self):
        with pytest.raises(ValueError):
            SeedAnnotation("x", np.zeros((3, 2)), np.zeros((3, 2)))
