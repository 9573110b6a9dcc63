import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pitchreg.errors import (
    DegenerateConfiguration,
    ParallelSides,
    PointAtInfinity,
    SingularMatrix,
)
from pitchreg.geometry import (
    apply_homography,
    canonicalize,
    check_homography,
    convergence_point,
    estimate_dlt,
    format_homography,
    invert_homography,
    parse_homography,
    polygon_area,
    polygon_iou,
    rect_quad,
    warp_quad,
)

from conftest import random_convex_quad


def random_well_conditioned_h(rng):
    """Identity-dominant projective map, comfortably invertible."""
    h = np.eye(3)
    h[:2, :2] += rng.uniform(-0.3, 0.3, size=(2, 2))
    h[:2, 2] = rng.uniform(-10.0, 10.0, size=2)
    h[2, :2] = rng.uniform(-1e-3, 1e-3, size=2)
    return canonicalize(h)


class TestApply:
    def test_identity(self):
        assert np.allclose(apply_homography(np.eye(3), [10.0, 20.0]), [10.0, 20.0])

    def test_pure_scaling(self):
        h = np.diag([2.0, 2.0, 1.0])
        assert np.allclose(apply_homography(h, [3.0, 4.0]), [6.0, 8.0])

    def test_matches_direct_three_vector_oracle(self):
        rng = np.random.default_rng(11)
        h = random_well_conditioned_h(rng)
        pts = rng.uniform(-100.0, 100.0, size=(100, 2))
        got = apply_homography(h, pts)
        for p, g in zip(pts, got):
            vec = h @ np.array([p[0], p[1], 1.0])
            assert np.abs(g - vec[:2] / vec[2]).max() < 1e-10

    def test_point_at_infinity(self):
        h = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        with pytest.raises(PointAtInfinity):
            apply_homography(h, [0.0, 5.0])


class TestInvert:
    def test_identity(self):
        assert np.allclose(invert_homography(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        h = np.diag([2.0, 2.0, 1.0])
        assert np.allclose(invert_homography(h), np.diag([0.5, 0.5, 1.0]))

    def test_round_trip_through_dlt(self):
        rng = np.random.default_rng(3)
        quad = random_convex_quad(rng)
        h = estimate_dlt(rect_quad(256.0, 144.0), quad)
        hi = invert_homography(h)
        pts = rng.uniform(10.0, 130.0, size=(50, 2))
        assert np.abs(apply_homography(hi, apply_homography(h, pts)) - pts).max() < 1e-9

    def test_singular(self):
        with pytest.raises(SingularMatrix):
            invert_homography(np.zeros((3, 3)))

    def test_apply_invert_identity_many_points(self):
        rng = np.random.default_rng(5)
        h = random_well_conditioned_h(rng)
        hi = invert_homography(h)
        pts = rng.uniform(-50.0, 50.0, size=(1000, 2))
        assert np.abs(apply_homography(hi, apply_homography(h, pts)) - pts).max() < 1e-9


class TestCanonicalize:
    def test_scales_lower_right_to_one(self):
        h = 3.0 * np.eye(3)
        c = canonicalize(h)
        assert c[2, 2] == 1.0
        assert np.allclose(c, np.eye(3))

    def test_frobenius_fallback(self):
        h = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        c = canonicalize(h)
        assert abs(np.linalg.norm(c) - 1.0) < 1e-12
        flat = c.ravel()
        assert flat[np.flatnonzero(np.abs(flat) > 1e-12)[0]] > 0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_idempotent_exactly(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.normal(size=(3, 3))
        if abs(np.linalg.det(h)) < 1e-6:
            return
        c = canonicalize(h)
        assert np.array_equal(canonicalize(c), c)


class TestEstimateDlt:
    def test_unit_square_identity(self):
        sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        assert np.abs(estimate_dlt(sq, sq) - np.eye(3)).max() < 1e-9

    def test_unit_square_doubled(self):
        sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        h = estimate_dlt(sq, 2.0 * sq)
        assert np.abs(h - np.diag([2.0, 2.0, 1.0])).max() < 1e-9

    def test_synthesize_then_recover(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            h_true = random_well_conditioned_h(rng)
            src = rng.uniform(-40.0, 40.0, size=(4, 2))
            try:
                h_est = estimate_dlt(src, apply_homography(h_true, src))
            except DegenerateConfiguration:
                continue
            assert np.abs(h_est - h_true).max() < 1e-8

    def test_exact_for_four_points(self):
        rng = np.random.default_rng(23)
        quad = random_convex_quad(rng)
        rect = rect_quad(256.0, 144.0)
        h = estimate_dlt(rect, quad)
        assert np.abs(apply_homography(h, rect) - quad).max() < 1e-9

    def test_collinear_raises(self):
        src = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 0.0]])
        dst = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(DegenerateConfiguration):
            estimate_dlt(src, dst)

    def test_coincident_raises(self):
        src = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [5.0, 0.0]])
        dst = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(DegenerateConfiguration):
            estimate_dlt(src, dst)

    def test_similarity_equivariance(self):
        rng = np.random.default_rng(29)
        src = rng.uniform(-30.0, 30.0, size=(6, 2))
        dst = apply_homography(random_well_conditioned_h(rng), src)
        h_ref = estimate_dlt(src, dst)
        ang = 0.7
        s_sim = canonicalize(
            np.array(
                [
                    [3.0 * np.cos(ang), -3.0 * np.sin(ang), 5.0],
                    [3.0 * np.sin(ang), 3.0 * np.cos(ang), -2.0],
                    [0.0, 0.0, 1.0],
                ]
            )
        )
        t_sim = canonicalize(
            np.array([[0.5, 0.0, -7.0], [0.0, 0.5, 4.0], [0.0, 0.0, 1.0]])
        )
        h2 = estimate_dlt(apply_homography(s_sim, src), apply_homography(t_sim, dst))
        recovered = canonicalize(invert_homography(t_sim) @ h2 @ s_sim)
        assert np.abs(recovered - h_ref).max() < 1e-7


class TestWarpQuad:
    def test_identity(self):
        q = np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]])
        assert np.allclose(warp_quad(np.eye(3), q), q)

    def test_translation(self):
        q = np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]])
        h = np.array([[1.0, 0.0, 5.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        assert np.allclose(warp_quad(h, q), q + [5.0, 0.0])

    def test_matches_cornerwise_apply(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            q = random_convex_quad(rng)
            h = random_well_conditioned_h(rng)
            warped = warp_quad(h, q)
            direct = apply_homography(h, q)
            if polygon_area(direct) < 0:
                direct = direct[[0, 3, 2, 1]]
            assert np.allclose(warped, direct)


def inside_convex(quad, px, py):
    ok = np.ones(px.shape, dtype=bool)
    for i in range(4):
        ax, ay = quad[i]
        bx, by = quad[(i + 1) % 4]
        ok &= (bx - ax) * (py - ay) - (by - ay) * (px - ax) >= 0.0
    return ok


def rasterized_iou(a, b, n=600):
    pts = np.vstack([a, b])
    lo = pts.min(axis=0) - 1.0
    hi = pts.max(axis=0) + 1.0
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    px, py = np.meshgrid(xs, ys)
    ina = inside_convex(a, px, py)
    inb = inside_convex(b, px, py)
    union = np.count_nonzero(ina | inb)
    return np.count_nonzero(ina & inb) / union if union else 0.0


class TestPolygonIou:
    def test_identical_exactly_one(self):
        rng = np.random.default_rng(37)
        q = random_convex_quad(rng)
        assert polygon_iou(q, q) == 1.0

    def test_disjoint(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        assert polygon_iou(a, a + 10.0) == 0.0

    def test_axis_aligned_third(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        b = a + [0.5, 0.0]
        assert abs(polygon_iou(a, b) - 1.0 / 3.0) < 1e-12

    def test_symmetric(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            a = random_convex_quad(rng)
            b = random_convex_quad(rng)
            assert abs(polygon_iou(a, b) - polygon_iou(b, a)) < 1e-12

    def test_against_rasterization(self):
        rng = np.random.default_rng(43)
        for _ in range(30):
            a = random_convex_quad(rng)
            b = random_convex_quad(rng)
            assert abs(polygon_iou(a, b) - rasterized_iou(a, b)) < 1.5e-2


class TestConvergencePoint:
    def test_parallel_sides(self):
        rect = np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]])
        with pytest.raises(ParallelSides):
            convergence_point(rect)

    def test_trapezoid(self):
        q = np.array([[-1.0, 1.0], [1.0, 1.0], [2.0, 2.0], [-2.0, 2.0]])
        assert np.allclose(convergence_point(q), [0.0, 0.0])


class TestTextFormat:
    def test_round_trip(self):
        rng = np.random.default_rng(47)
        h = random_well_conditioned_h(rng)
        assert np.array_equal(parse_homography(format_homography(h)), h)

    def test_comments_skipped(self):
        text = "# fingerprint=abc\n" + format_homography(np.eye(3))
        assert np.array_equal(parse_homography(text), np.eye(3))

    def test_bad_count(self):
        with pytest.raises(ValueError):
            parse_homography("1 2 3")


def test_check_homography_rejects_singular():
    with pytest.raises(SingularMatrix):
        check_homography(np.ones((3, 3)))
