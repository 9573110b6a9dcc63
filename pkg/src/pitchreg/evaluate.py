"""Dataset-level evaluation: synthetic test sets, IOU scoring, noise sweeps.

Synthetic seed cameras and held-out queries are drawn from the same
plausible broadcast-camera ranges used throughout the test suite; queries
sample pan/tilt/zoom continuously inside the grid ranges so they never
coincide with dictionary nodes.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .dictionary import (
    Dictionary,
    MIN_EDGE_PIXELS,
    PtzGrid,
    SeedAnnotation,
    seed_quad,
    simulate_pan,
    simulate_tilt,
    simulate_zoom,
)
from .errors import EmptyEdgeMap, EmptyRenderWarning, PitchRegError, SeedOverlap
from .geometry import estimate_dlt, polygon_iou, rect_quad, warp_quad
from .matcher import register_frame
from .pitch import PitchModel, render_camera_view
from .temporal import (
    CameraParams,
    camera_to_quad,
    homography_distance,
    quad_to_camera,
)

# Broadcast-like camera ranges behind the y=0 touchline of a 105x68 pitch.
_CAMERA_RANGES = {
    "cx": (35.0, 70.0),
    "cy": (-42.0, -24.0),
    "pan": (-0.22, 0.22),
    "phi": (0.36, 0.54),
    "r1": (32.0, 48.0),
    "r2_ratio": (1.9, 2.5),
}


@dataclass(frozen=True, eq=False)
class GroundTruthRecord:
    """Frame identifier and its ground-truth image-to-model homography."""

    frame_id: str
    h_gt: np.ndarray


@dataclass(frozen=True)
class EvalReport:
    """Per-frame IOUs with their aggregates for one metric/config."""

    frame_ids: tuple[str, ...]
    ious: tuple[float, ...]
    mean: float
    median: float
    metric: str
    fingerprint: str
    n_failed: int = 0
    label: str = ""


def _make_report(frame_ids, ious, metric, fingerprint, n_failed=0, label="") -> EvalReport:
    ious = tuple(float(v) for v in ious)
    return EvalReport(
        frame_ids=tuple(frame_ids),
        ious=ious,
        mean=float(np.mean(ious)) if ious else 0.0,
        median=float(np.median(ious)) if ious else 0.0,
        metric=metric,
        fingerprint=fingerprint,
        n_failed=n_failed,
        label=label,
    )


def _random_camera(rng: np.random.Generator) -> CameraParams:
    r = _CAMERA_RANGES
    r1 = rng.uniform(*r["r1"])
    return CameraParams(
        cx=rng.uniform(*r["cx"]),
        cy=rng.uniform(*r["cy"]),
        theta=np.pi / 2.0 + rng.uniform(*r["pan"]),
        phi=rng.uniform(*r["phi"]),
        r1=r1,
        r2=r1 * rng.uniform(*r["r2_ratio"]),
    )


def synthetic_seed_annotations(
    n: int,
    rng_seed: int,
    model: PitchModel,
    raster_size: tuple[int, int] = (256, 144),
    min_pixels: int = 4 * MIN_EDGE_PIXELS,
) -> list[SeedAnnotation]:
    """Draw n plausible seed cameras and express them as annotations.

    Each seed is the image-corner rectangle paired with its projected
    boundary quad; only cameras whose rendered view shows at least
    ``min_pixels`` field-line pixels are kept.
    """
    rng = np.random.default_rng(rng_seed)
    w, h = raster_size
    rect = rect_quad(float(w), float(h))
    seeds = []
    attempts = 0
    while len(seeds) < n:
        attempts += 1
        if attempts > 200 * n:
            raise PitchRegError("could not draw enough visible seed cameras")
        cam = _random_camera(rng)
        try:
            quad = camera_to_quad(cam)
            homography = estimate_dlt(rect, quad)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptyRenderWarning)
                edges = render_camera_view(model, homography, w, h)
        except PitchRegError:
            continue
        if int(edges.sum()) < min_pixels:
            continue
        seeds.append(
            SeedAnnotation(f"seed{rng_seed}_{len(seeds):03d}", rect.copy(), quad)
        )
    return seeds


def perturbed_seed_annotations(
    seeds,
    rng_seed: int,
    model: PitchModel,
    raster_size: tuple[int, int] = (256, 144),
    position_jitter_m: float = 1.0,
    angle_jitter_rad: float = 0.01,
    range_jitter_m: float = 1.0,
) -> list[SeedAnnotation]:
    """Held-out variants of the given seeds: same camera family, jittered.

    The jitters move the camera off every dictionary manifold (checked by
    homography distance downstream) while staying inside its coverage.
    """
    rng = np.random.default_rng(rng_seed)
    w, h = raster_size
    rect = rect_quad(float(w), float(h))
    out = []
    for i, seed in enumerate(seeds):
        base = None
        for _ in range(100):
            quad = seed_quad(seed, raster_size)
            cam = quad_to_camera(quad)
            jit = rng.normal(size=6) * np.array(
                [
                    position_jitter_m,
                    position_jitter_m,
                    angle_jitter_rad,
                    angle_jitter_rad / 2.0,
                    range_jitter_m,
                    range_jitter_m,
                ]
            )
            try:
                cam2 = CameraParams.from_array(cam.as_array() + jit)
                quad2 = camera_to_quad(cam2)
                homography = estimate_dlt(rect, quad2)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", EmptyRenderWarning)
                    edges = render_camera_view(model, homography, w, h)
            except PitchRegError:
                continue
            if int(edges.sum()) >= 2 * MIN_EDGE_PIXELS:
                base = SeedAnnotation(f"held{rng_seed}_{i:03d}", rect.copy(), quad2)
                break
        if base is None:
            raise PitchRegError(f"could not perturb seed {seed.image_id}")
        out.append(base)
    return out


def make_synthetic_testset(
    seeds,
    grid: PtzGrid,
    n: int,
    rng_seed: int,
    model: PitchModel,
    raster_size: tuple[int, int] = (256, 144),
    exclude=(),
) -> list[tuple[np.ndarray, GroundTruthRecord]]:
    """Generate n held-out (edge map, ground truth) pairs.

    Pan, tilt and zoom are sampled continuously and uniformly within the
    grid's ranges (almost surely off the grid nodes); the test seeds must
    be disjoint from every homography in ``exclude``.

    Raises:
        SeedOverlap: if a test seed matches an excluded seed to within
            1e-6 homography distance.
    """
    seeds = list(seeds)
    ones = np.ones(8)
    for seed in seeds:
        h_seed = seed.homography()
        for other in exclude:
            h_other = other.homography() if hasattr(other, "homography") else other
            if homography_distance(h_seed, h_other, ones) <= 1e-6:
                raise SeedOverlap(f"test seed {seed.image_id} overlaps the dictionary")
    rng = np.random.default_rng(rng_seed)
    w, h = raster_size
    rect = rect_quad(float(w), float(h))
    pan_lo, pan_hi = min(grid.pan_steps), max(grid.pan_steps)
    tilt_lo, tilt_hi = min(grid.tilt_steps), max(grid.tilt_steps)
    zoom_lo, zoom_hi = min(grid.zoom_factors), max(grid.zoom_factors)
    base_quads = [seed_quad(s, raster_size) for s in seeds]
    out = []
    for i in range(n):
        for _ in range(100):
            q0 = base_quads[int(rng.integers(len(seeds)))]
            pan = float(rng.uniform(pan_lo, pan_hi))
            tilt = float(rng.uniform(tilt_lo, tilt_hi))
            zoom = float(rng.uniform(zoom_lo, zoom_hi))
            try:
                quad = simulate_zoom(simulate_tilt(simulate_pan(q0, pan), tilt), zoom)
                homography = estimate_dlt(rect, quad)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", EmptyRenderWarning)
                    edges = render_camera_view(model, homography, w, h)
            except PitchRegError:
                continue
            if int(edges.sum()) >= MIN_EDGE_PIXELS:
                out.append((edges, GroundTruthRecord(f"test{i:05d}", homography)))
                break
        else:
            raise PitchRegError(f"could not sample a visible test view (item {i})")
    return out


def _eval_fingerprint(dct: Dictionary, metric: str, k: int, extra=None) -> str:
    payload = json.dumps(
        {"dict": dct.fingerprint(), "metric": metric, "k": k, "extra": extra},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def evaluate(
    queries,
    dct: Dictionary,
    metric: str = "hog",
    k: int = 5,
    label: str = "",
) -> EvalReport:
    """Register every query and score rank-1 homographies by polygon IOU.

    Queries whose edge map is empty are counted in ``n_failed`` and
    excluded from the aggregates.
    """
    w, h = dct.raster_size
    rect = rect_quad(float(w), float(h))
    frame_ids, ious = [], []
    n_failed = 0
    for edges, gt in queries:
        try:
            cs = register_frame(edges, dct, metric=metric, k=k, query_id=gt.frame_id)
        except EmptyEdgeMap:
            n_failed += 1
            continue
        est = dct.homographies[cs[0].entry_index]
        iou = polygon_iou(warp_quad(est, rect), warp_quad(gt.h_gt, rect))
        frame_ids.append(gt.frame_id)
        ious.append(iou)
    return _make_report(
        frame_ids,
        ious,
        metric,
        _eval_fingerprint(dct, metric, k),
        n_failed=n_failed,
        label=label,
    )


def apply_noise(
    edges: np.ndarray, dropout: float, salt: float, rng: np.random.Generator
) -> np.ndarray:
    """Drop a fraction of set pixels, then salt a fraction of all pixels."""
    out = (np.asarray(edges) > 0).astype(np.uint8)
    if dropout > 0:
        ys, xs = np.nonzero(out)
        drop = rng.random(len(ys)) < dropout
        out[ys[drop], xs[drop]] = 0
    if salt > 0:
        out[rng.random(out.shape) < salt] = 1
    return out


def noise_sweep(
    queries,
    dct: Dictionary,
    metric: str,
    dropout_fracs,
    salt_fracs,
    rng_seed: int,
    k: int = 5,
) -> list[EvalReport]:
    """Re-evaluate under every (dropout, salt) combination."""
    queries = list(queries)
    reports = []
    for i, dropout in enumerate(dropout_fracs):
        for j, salt in enumerate(salt_fracs):
            label = f"dropout={dropout:g},salt={salt:g}"
            if dropout == 0 and salt == 0:
                noisy = queries
            else:
                rng = np.random.default_rng([rng_seed, i, j])
                noisy = [
                    (apply_noise(e, dropout, salt, rng), gt) for e, gt in queries
                ]
            report = evaluate(noisy, dct, metric=metric, k=k, label=label)
            reports.append(report)
    return reports


def format_report_table(reports) -> str:
    """Human-readable table mirroring a mean/median results layout."""
    rows = [("run", "metric", "mean", "median", "frames", "failed")]
    for r in reports:
        rows.append(
            (
                r.label or "clean",
                r.metric,
                f"{100.0 * r.mean:.1f}",
                f"{100.0 * r.median:.1f}",
                str(len(r.ious)),
                str(r.n_failed),
            )
        )
    widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines)


def report_csv(report: EvalReport) -> str:
    """CSV serialization: one row per frame plus aggregate rows."""
    lines = [f"# fingerprint={report.fingerprint}", "frame_id,iou"]
    lines += [f"{fid},{iou!r}" for fid, iou in zip(report.frame_ids, report.ious)]
    lines.append(f"mean,{report.mean!r}")
    lines.append(f"median,{report.median!r}")
    return "\n".join(lines) + "\n"
