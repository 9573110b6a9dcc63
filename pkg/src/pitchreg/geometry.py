"""Planar projective geometry: homographies, quad warping, DLT and polygon IOU.

Homographies are plain 3x3 float64 arrays mapping homogeneous 2D points,
kept in a canonical normalization so that matrices can be compared
entrywise.  Quads are (4, 2) arrays whose corners are the projections of
the image-rectangle corners (bottom-left, bottom-right, top-right,
top-left) and are counter-clockwise in model coordinates.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DegeneratePolygon,
    NonConvexResult,
    ParallelSides,
    PointAtInfinity,
    SingularMatrix,
)

DET_EPS = 1e-12
W_EPS = 1e-12
AREA_EPS = 1e-9
PARALLEL_EPS = 1e-6


def canonicalize(h: np.ndarray) -> np.ndarray:
    """Return the canonical form of a homography.

    The lower-right entry is scaled to exactly 1 whenever it is nonzero;
    otherwise the matrix is scaled to unit Frobenius norm with its first
    nonzero entry positive.  Idempotent: canonicalizing a canonical matrix
    returns it unchanged.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (3, 3):
        raise ValueError(f"homography must be 3x3, got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("homography has non-finite entries")
    w = h[2, 2]
    if abs(w) > W_EPS:
        if w == 1.0:
            return h.copy()
        return h / w
    norm = float(np.linalg.norm(h))
    if norm < DET_EPS:
        raise SingularMatrix("homography is numerically zero")
    out = h.copy() if abs(norm - 1.0) <= 4 * np.finfo(np.float64).eps else h / norm
    flat = out.ravel()
    first = flat[np.flatnonzero(np.abs(flat) > DET_EPS)[0]]
    if first < 0:
        out = -out
    return out


def check_homography(h: np.ndarray) -> np.ndarray:
    """Validate a 3x3 invertible homography and return it as float64."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (3, 3):
        raise ValueError(f"homography must be 3x3, got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("homography has non-finite entries")
    if abs(np.linalg.det(h)) <= DET_EPS:
        raise SingularMatrix("homography determinant magnitude <= 1e-12")
    return h


def apply_homography(h: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply a homography to one point or an (n, 2) array of points.

    Raises:
        PointAtInfinity: if any dehomogenized third coordinate has
            magnitude <= 1e-12.
    """
    h = np.asarray(h, dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    hom = np.column_stack([pts, np.ones(len(pts))]) @ h.T
    w = hom[:, 2]
    if np.any(np.abs(w) <= W_EPS):
        raise PointAtInfinity("point maps to infinity under homography")
    out = hom[:, :2] / w[:, None]
    return out[0] if single else out


def invert_homography(h: np.ndarray) -> np.ndarray:
    """Invert a homography; the result is canonically normalized."""
    h = check_homography(h)
    try:
        inv = np.linalg.inv(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - det check above
        raise SingularMatrix(str(exc)) from exc
    return canonicalize(inv)


def _triangle_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return 0.5 * abs(
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    )


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity transform mapping pts to centroid 0, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    dist = np.linalg.norm(pts - centroid, axis=1).mean()
    scale = np.sqrt(2.0) / dist if dist > 0 else 1.0
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def estimate_dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Estimate the homography mapping src points to dst points.

    Least-squares DLT with isotropic (Hartley) normalization of both point
    sets.  With four exact correspondences the reprojection error is below
    1e-9.

    Args:
        src: (n, 2) source points, n >= 4.
        dst: (n, 2) destination points in one-to-one correspondence.

    Returns:
        Canonical 3x3 homography with ``apply_homography(h, src) ~= dst``.

    Raises:
        DegenerateConfiguration: for collinear source triples or
            coincident points.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("src and dst must both be (n, 2) arrays")
    n = len(src)
    if n < 4:
        raise ValueError("at least 4 correspondences are required")
    for pts in (src, dst):
        diff = pts[:, None, :] - pts[None, :, :]
        d2 = (diff ** 2).sum(axis=2)
        iu = np.triu_indices(n, k=1)
        if np.any(d2[iu] < 1e-24):
            raise DegenerateConfiguration("coincident points")
    if n <= 12:
        for i in range(n - 2):
            for j in range(i + 1, n - 1):
                for k in range(j + 1, n):
                    if _triangle_area(src[i], src[j], src[k]) < AREA_EPS:
                        raise DegenerateConfiguration(
                            f"source points {i},{j},{k} are collinear"
                        )

    ts = _hartley_normalization(src)
    td = _hartley_normalization(dst)
    s = apply_homography(ts, src)
    d = apply_homography(td, dst)

    a = np.zeros((2 * n, 9))
    a[0::2, 0] = -s[:, 0]
    a[0::2, 1] = -s[:, 1]
    a[0::2, 2] = -1.0
    a[0::2, 6] = d[:, 0] * s[:, 0]
    a[0::2, 7] = d[:, 0] * s[:, 1]
    a[0::2, 8] = d[:, 0]
    a[1::2, 3] = -s[:, 0]
    a[1::2, 4] = -s[:, 1]
    a[1::2, 5] = -1.0
    a[1::2, 6] = d[:, 1] * s[:, 0]
    a[1::2, 7] = d[:, 1] * s[:, 1]
    a[1::2, 8] = d[:, 1]

    _, sv, vt = np.linalg.svd(a)
    if sv[-2] < 1e-12 * max(sv[0], 1.0):
        raise DegenerateConfiguration("correspondences do not determine a homography")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(td) @ hn @ ts
    if abs(np.linalg.det(h)) <= DET_EPS:
        raise DegenerateConfiguration("estimated homography is singular")
    return canonicalize(h)


def rect_quad(width: float, height: float) -> np.ndarray:
    """Corner quad of a width x height image rectangle.

    Corners are (bottom-left, bottom-right, top-right, top-left) in image
    pixel coordinates, where y grows downward so the bottom row has
    y = height.
    """
    return np.array(
        [[0.0, height], [width, height], [width, 0.0], [0.0, 0.0]]
    )


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise vertices)."""
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def is_convex_ccw(poly: np.ndarray) -> bool:
    """True if the polygon is convex with counter-clockwise winding."""
    p = np.asarray(poly, dtype=np.float64)
    n = len(p)
    if n < 3:
        return False
    e = np.roll(p, -1, axis=0) - p
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    scale = max(float(np.abs(p).max()) ** 2, 1.0)
    return bool(np.all(cross > -1e-12 * scale)) and polygon_area(p) > 0.0


def check_quad(q: np.ndarray) -> np.ndarray:
    """Validate a convex counter-clockwise quad with positive area."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4, 2):
        raise ValueError(f"quad must be (4, 2), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("quad has non-finite corners")
    if not is_convex_ccw(q):
        raise NonConvexResult("quad is not convex counter-clockwise")
    if polygon_area(q) <= AREA_EPS:
        raise DegeneratePolygon("quad area below 1e-9")
    return q


def warp_quad(h: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Warp quad corners through a homography, re-establishing CCW order.

    Raises:
        PointAtInfinity: if a corner maps to infinity.
        NonConvexResult: if the warped quad is not convex.
    """
    q = np.asarray(q, dtype=np.float64)
    warped = apply_homography(h, q)
    if polygon_area(warped) < 0:
        warped = warped[[0, 3, 2, 1]]
    if not is_convex_ccw(warped):
        raise NonConvexResult("warped quad is not convex")
    return warped


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex subject by a convex CCW polygon."""
    output = [tuple(p) for p in np.asarray(subject, dtype=np.float64)]
    clip = np.asarray(clip, dtype=np.float64)
    n = len(clip)
    for i in range(n):
        if not output:
            return np.empty((0, 2))
        cp1 = clip[i]
        cp2 = clip[(i + 1) % n]
        ex, ey = cp2[0] - cp1[0], cp2[1] - cp1[1]

        def inside(p):
            return ex * (p[1] - cp1[1]) - ey * (p[0] - cp1[0]) >= 0.0

        def intersection(s, e):
            dx, dy = e[0] - s[0], e[1] - s[1]
            denom = ex * dy - ey * dx
            if denom == 0.0:
                return e
            t = (ex * (s[1] - cp1[1]) - ey * (s[0] - cp1[0])) / -denom
            return (s[0] + t * dx, s[1] + t * dy)

        result = []
        s = output[-1]
        s_in = inside(s)
        for e in output:
            e_in = inside(e)
            if e_in:
                if not s_in:
                    result.append(intersection(s, e))
                result.append(e)
            elif s_in:
                result.append(intersection(s, e))
            s, s_in = e, e_in
        output = result
    return np.asarray(output) if output else np.empty((0, 2))


def polygon_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two convex quads.

    Computed analytically via convex clipping and shoelace areas.  Exactly
    1.0 for identical quads and symmetric in its arguments.

    Raises:
        DegeneratePolygon: if either quad is degenerate.
    """
    a = check_quad(a)
    b = check_quad(b)
    if np.array_equal(a, b):
        return 1.0
    inter = clip_convex(a, b)
    area_i = polygon_area(inter) if len(inter) >= 3 else 0.0
    area_i = max(area_i, 0.0)
    union = polygon_area(a) + polygon_area(b) - area_i
    if union <= 0.0:
        raise DegeneratePolygon("union of quads has non-positive area")
    return float(min(max(area_i / union, 0.0), 1.0))


def convergence_point(q: np.ndarray) -> np.ndarray:
    """Intersection of the quad side lines q0q3 and q1q2.

    This is the model-plane point toward which the projected left and
    right image borders converge (the camera's ground projection).

    Raises:
        ParallelSides: if the side directions differ by less than 1e-6 rad.
    """
    q = np.asarray(q, dtype=np.float64)
    d03 = q[3] - q[0]
    d12 = q[2] - q[1]
    n03 = np.linalg.norm(d03)
    n12 = np.linalg.norm(d12)
    if n03 < 1e-12 or n12 < 1e-12:
        raise DegenerateConfiguration("quad side has zero length")
    u, v = d03 / n03, d12 / n12
    cross = u[0] * v[1] - u[1] * v[0]
    if abs(cross) < PARALLEL_EPS:
        raise ParallelSides("quad side lines are parallel")
    # Solve q0 + t*u = q1 + s*v.
    rhs = q[1] - q[0]
    t = (rhs[0] * v[1] - rhs[1] * v[0]) / cross
    return q[0] + t * u


def format_homography(h: np.ndarray) -> str:
    """Nine whitespace-separated decimals, row-major."""
    return " ".join(repr(float(v)) for v in np.asarray(h, dtype=np.float64).ravel())


def parse_homography(text: str) -> np.ndarray:
    """Parse the nine-decimal row-major homography text format.

    Lines starting with ``#`` are ignored.
    """
    body = "\n".join(
        line for line in text.splitlines() if not line.lstrip().startswith("#")
    )
    values = [float(tok) for tok in body.split()]
    if len(values) != 9:
        raise ValueError(f"expected 9 homography values, got {len(values)}")
    return check_homography(np.array(values).reshape(3, 3))
