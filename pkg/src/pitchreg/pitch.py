"""Static top-view pitch model and rasterization of its line markings.

The model lives in metric coordinates with the origin at the bottom-left
corner of the pitch and +x along the long (105 m) side.  Rendering
projects the markings either straight into a top-view raster or through a
homography into a simulated camera view.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmptyRenderWarning
from .geometry import apply_homography, check_homography, invert_homography

# Chord error (meters) for polyline approximation of arcs; small enough
# that the image-space error stays below ~0.1 px at maximum zoom.
ARC_CHORD_TOL_M = 0.002
SEGMENT_STEP_M = 0.5
IMAGE_SAMPLE_STEP_PX = 0.45


@dataclass(frozen=True)
class Segment:
    """Straight marking from point a to point b (meters)."""

    a: tuple[float, float]
    b: tuple[float, float]

    def __post_init__(self):
        if math.dist(self.a, self.b) <= 0.0:
            raise ValueError("segment endpoints must be distinct")


@dataclass(frozen=True)
class Arc:
    """Circular arc marking; angles in radians, sweep in (0, 2*pi]."""

    center: tuple[float, float]
    radius_m: float
    start_angle: float
    end_angle: float

    def __post_init__(self):
        if self.radius_m <= 0.0:
            raise ValueError("arc radius must be positive")
        sweep = self.end_angle - self.start_angle
        if not 0.0 < sweep <= 2.0 * math.pi + 1e-12:
            raise ValueError("arc sweep must be in (0, 2*pi]")


Primitive = Segment | Arc


@dataclass(frozen=True)
class PitchModel:
    """Immutable field geometry plus the meters-to-pixels top-view scale."""

    length_m: float
    width_m: float
    px_per_m: float
    primitives: tuple[Primitive, ...]

    def __post_init__(self):
        if self.length_m <= 0 or self.width_m <= 0:
            raise ValueError("pitch dimensions must be positive")
        if self.px_per_m <= 0:
            raise ValueError("px_per_m must be positive")
        bound = 1e-6
        for p in self.primitives:
            pts = (p.a, p.b) if isinstance(p, Segment) else (p.center,)
            for x, y in pts:
                if not (-bound <= x <= self.length_m + bound) or not (
                    -bound <= y <= self.width_m + bound
                ):
                    raise ValueError(f"primitive coordinate ({x}, {y}) out of bounds")

    @property
    def topview_size(self) -> tuple[int, int]:
        """(width_px, height_px) of the top-view raster."""
        return (
            int(round(self.length_m * self.px_per_m)),
            int(round(self.width_m * self.px_per_m)),
        )


def standard_pitch(px_per_m: float = 10.0) -> PitchModel:
    """FIFA-standard 105 x 68 m pitch with the usual markings.

    Markings: boundary (4 segments), halfway line, center circle and
    center mark, both penalty areas and goal areas (3 segments each),
    penalty marks, penalty arcs clipped outside the penalty areas, and the
    four corner arcs.
    """
    if px_per_m <= 0:
        raise ValueError("px_per_m must be positive")
    length, width = 105.0, 68.0
    cy = width / 2.0
    mark_r = 0.2
    circle_r = 9.15
    pen_depth, pen_half = 16.5, 40.32 / 2.0
    goal_depth, goal_half = 5.5, 18.32 / 2.0
    pen_x = 11.0
    # Penalty arc: portion of the 9.15 m circle around the penalty mark
    # lying outside the penalty area (|cos| >= (16.5 - 11) / 9.15).
    alpha = math.acos((pen_depth - pen_x) / circle_r)

    prims: list[Primitive] = [
        Segment((0.0, 0.0), (length, 0.0)),
        Segment((length, 0.0), (length, width)),
        Segment((length, width), (0.0, width)),
        Segment((0.0, width), (0.0, 0.0)),
        Segment((length / 2.0, 0.0), (length / 2.0, width)),
        Arc((length / 2.0, cy), circle_r, 0.0, 2.0 * math.pi),
        Arc((length / 2.0, cy), mark_r, 0.0, 2.0 * math.pi),
    ]
    for x0, direction in ((0.0, 1.0), (length, -1.0)):
        xf_pen = x0 + direction * pen_depth
        prims += [
            Segment((x0, cy - pen_half), (xf_pen, cy - pen_half)),
            Segment((xf_pen, cy - pen_half), (xf_pen, cy + pen_half)),
            Segment((xf_pen, cy + pen_half), (x0, cy + pen_half)),
        ]
        xf_goal = x0 + direction * goal_depth
        prims += [
            Segment((x0, cy - goal_half), (xf_goal, cy - goal_half)),
            Segment((xf_goal, cy - goal_half), (xf_goal, cy + goal_half)),
            Segment((xf_goal, cy + goal_half), (x0, cy + goal_half)),
        ]
        mark_x = x0 + direction * pen_x
        prims.append(Arc((mark_x, cy), mark_r, 0.0, 2.0 * math.pi))
        mid = 0.0 if direction > 0 else math.pi
        prims.append(Arc((mark_x, cy), circle_r, mid - alpha, mid + alpha))
    prims += [
        Arc((0.0, 0.0), 1.0, 0.0, math.pi / 2.0),
        Arc((length, 0.0), 1.0, math.pi / 2.0, math.pi),
        Arc((length, width), 1.0, math.pi, 3.0 * math.pi / 2.0),
        Arc((0.0, width), 1.0, 3.0 * math.pi / 2.0, 2.0 * math.pi),
    ]
    return PitchModel(length, width, px_per_m, tuple(prims))


def load_pitch_file(
    path: str,
    length_m: float = 105.0,
    width_m: float = 68.0,
    px_per_m: float = 10.0,
) -> PitchModel:
    """Load a pitch description: one primitive per line.

    Lines are ``S x1 y1 x2 y2`` for segments or ``A cx cy r a0 a1`` for
    arcs, in meters and radians.  Blank lines and ``#`` comments are
    skipped.
    """
    prims: list[Primitive] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            try:
                if tok[0] == "S" and len(tok) == 5:
                    x1, y1, x2, y2 = map(float, tok[1:])
                    prims.append(Segment((x1, y1), (x2, y2)))
                elif tok[0] == "A" and len(tok) == 6:
                    cx, cy, r, a0, a1 = map(float, tok[1:])
                    prims.append(Arc((cx, cy), r, a0, a1))
                else:
                    raise ValueError("unrecognized primitive line")
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return PitchModel(length_m, width_m, px_per_m, tuple(prims))


def _primitive_polyline(p: Primitive) -> np.ndarray:
    """Model-space polyline approximating one primitive."""
    if isinstance(p, Segment):
        a = np.asarray(p.a)
        b = np.asarray(p.b)
        n = max(int(math.ceil(math.dist(p.a, p.b) / SEGMENT_STEP_M)), 1)
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        return a + t * (b - a)
    sweep = p.end_angle - p.start_angle
    # Chord step keeping sagitta below ARC_CHORD_TOL_M: s ~= sqrt(8*r*tol).
    step = math.sqrt(8.0 * p.radius_m * ARC_CHORD_TOL_M)
    n = max(int(math.ceil(sweep * p.radius_m / step)), 8)
    ang = p.start_angle + sweep * np.linspace(0.0, 1.0, n + 1)
    return np.column_stack(
        [
            p.center[0] + p.radius_m * np.cos(ang),
            p.center[1] + p.radius_m * np.sin(ang),
        ]
    )


@lru_cache(maxsize=8)
def _model_polylines(model: PitchModel) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated coarse polylines of all primitives.

    Returns (points, segment_ok) where points is (n, 2) and segment_ok is
    an (n-1,) bool marking index pairs that belong to the same primitive.
    """
    pts = []
    seg_ok = []
    for p in model.primitives:
        poly = _primitive_polyline(p)
        if pts:
            seg_ok.append(np.zeros(1, dtype=bool))
        pts.append(poly)
        seg_ok.append(np.ones(len(poly) - 1, dtype=bool))
    if not pts:
        return np.empty((0, 2)), np.empty(0, dtype=bool)
    return np.vstack(pts), np.concatenate(seg_ok)


def topview_homography(model: PitchModel) -> np.ndarray:
    """Homography mapping top-view image pixels to model meters."""
    s = model.px_per_m
    return np.array(
        [[1.0 / s, 0.0, 0.0], [0.0, -1.0 / s, model.width_m], [0.0, 0.0, 1.0]]
    )


def render_camera_view(
    model: PitchModel, h: np.ndarray, width_px: int, height_px: int
) -> np.ndarray:
    """Render the model's markings as seen through a camera homography.

    Args:
        model: pitch geometry.
        h: homography mapping image pixels to model meters (the model is
            drawn through its inverse).
        width_px, height_px: output raster size.

    Returns:
        (height_px, width_px) uint8 edge map with 1-px strokes.  Emits an
        EmptyRenderWarning when nothing falls inside the raster.
    """
    h = check_homography(h)
    to_image = invert_homography(h)
    edges = np.zeros((height_px, width_px), dtype=np.uint8)
    points, seg_ok = _model_polylines(model)
    if len(points) == 0:
        warnings.warn("camera view render is empty", EmptyRenderWarning, stacklevel=2)
        return edges

    # Orient the projection so the visible half-plane has positive w: the
    # preimage of the raster center must project back with w > 0.
    center_model = apply_homography(h, np.array([width_px / 2.0, height_px / 2.0]))
    w_center = to_image[2, 0] * center_model[0] + to_image[2, 1] * center_model[1] + to_image[2, 2]
    if w_center < 0:
        to_image = -to_image

    hom = np.column_stack([points, np.ones(len(points))]) @ to_image.T
    w = hom[:, 2]
    valid = w > 1e-9
    xy = np.full((len(points), 2), np.nan)
    xy[valid] = hom[valid, :2] / w[valid, None]

    p0 = xy[:-1]
    p1 = xy[1:]
    pair_ok = seg_ok & valid[:-1] & valid[1:]
    margin = 2.0
    inside = lambda p: (
        (p[:, 0] >= -margin)
        & (p[:, 0] <= width_px + margin)
        & (p[:, 1] >= -margin)
        & (p[:, 1] <= height_px + margin)
    )
    # Cheap visibility cull: keep pairs with either endpoint near the
    # raster or whose bounding box spans it.
    span = (
        (np.minimum(p0[:, 0], p1[:, 0]) <= width_px + margin)
        & (np.maximum(p0[:, 0], p1[:, 0]) >= -margin)
        & (np.minimum(p0[:, 1], p1[:, 1]) <= height_px + margin)
        & (np.maximum(p0[:, 1], p1[:, 1]) >= -margin)
    )
    with np.errstate(invalid="ignore"):
        pair_ok &= inside(p0) | inside(p1) | span

    if not np.any(pair_ok):
        warnings.warn("camera view render is empty", EmptyRenderWarning, stacklevel=2)
        return edges

    a = p0[pair_ok]
    b = p1[pair_ok]
    lengths = np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1])
    counts = np.minimum(
        np.ceil(lengths / IMAGE_SAMPLE_STEP_PX).astype(np.int64) + 1, 4096
    )
    total = int(counts.sum())
    seg_idx = np.repeat(np.arange(len(a)), counts)
    # Fractional position of every sample within its segment.
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    local = np.arange(total) - offsets[seg_idx]
    t = local / np.maximum(counts[seg_idx] - 1, 1)
    samples = a[seg_idx] + t[:, None] * (b[seg_idx] - a[seg_idx])

    px = np.floor(samples[:, 0]).astype(np.int64)
    py = np.floor(samples[:, 1]).astype(np.int64)
    # Points exactly on the right/bottom raster edge belong to the last cell.
    px = np.where(samples[:, 0] == float(width_px), width_px - 1, px)
    py = np.where(samples[:, 1] == float(height_px), height_px - 1, py)
    keep = (px >= 0) & (px < width_px) & (py >= 0) & (py < height_px)
    edges[py[keep], px[keep]] = 1

    if not edges.any():
        warnings.warn("camera view render is empty", EmptyRenderWarning, stacklevel=2)
    return edges


def render_topview(model: PitchModel) -> np.ndarray:
    """Render the model's markings into the top-view raster."""
    w, hgt = model.topview_size
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyRenderWarning)
        return render_camera_view(model, topview_homography(model), w, hgt)
