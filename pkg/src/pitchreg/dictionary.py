"""Synthetic dictionary generation and storage.

A small set of annotated seed homographies is expanded into a large set
of (edge map, homography, camera parameters, HOG descriptor) entries by
simulating camera pan, tilt and zoom on the projected image-boundary
quadrilateral.  Dictionaries persist to a little-endian binary file
(magic ``PTVD``) carrying the raster geometry, the HOG configuration and
the homography normalization scales alongside the entries.
"""

from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .errors import (
    DegenerateQuad,
    EmptyRenderWarning,
    NoValidEntries,
    PitchRegError,
)
from .features import HogConfig, hog
from .geometry import (
    canonicalize,
    check_quad,
    convergence_point,
    estimate_dlt,
    polygon_area,
    rect_quad,
    warp_quad,
)
from .pitch import PitchModel, render_camera_view
from .temporal import CameraParams, quad_to_camera

DEFAULT_RASTER_SIZE = (256, 144)
MIN_EDGE_PIXELS = 50
_MAGIC = b"PTVD"
_VERSION = 1


@dataclass(frozen=True, eq=False)
class SeedAnnotation:
    """Four image-to-model correspondences for one annotated frame.

    Image coordinates are expressed in the reference raster frame (the
    dictionary raster, 256x144 by default); annotations made at native
    broadcast resolution must be scaled accordingly.
    """

    image_id: str
    image_points: np.ndarray
    model_points: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "image_points", np.asarray(self.image_points, dtype=np.float64)
        )
        object.__setattr__(
            self, "model_points", np.asarray(self.model_points, dtype=np.float64)
        )
        if self.image_points.shape != (4, 2) or self.model_points.shape != (4, 2):
            raise ValueError("seed annotations need exactly 4 point pairs")

    def homography(self) -> np.ndarray:
        """Image-to-model homography estimated from the four pairs."""
        return estimate_dlt(self.image_points, self.model_points)


def symmetric_steps(extent: float, n: int) -> tuple[float, ...]:
    """n steps spanning [-extent, extent]; odd n includes an exact zero."""
    if n < 1:
        raise ValueError("need at least one step")
    if n == 1:
        return (0.0,)
    if n % 2 == 0:
        raise ValueError("even step counts cannot include the identity")
    step = 2.0 * extent / (n - 1)
    return tuple((k - (n - 1) // 2) * step for k in range(n))


def geometric_zooms(ratio: float, n: int) -> tuple[float, ...]:
    """n zoom factors in geometric progression around an exact 1.0."""
    if ratio <= 1.0:
        raise ValueError("zoom ratio must exceed 1")
    if n % 2 == 0:
        raise ValueError("even step counts cannot include the identity")
    half = (n - 1) // 2
    return tuple(ratio ** k for k in range(-half, half + 1))


@dataclass(frozen=True)
class PtzGrid:
    """Pan, tilt and zoom steps simulated for every seed."""

    pan_steps: tuple[float, ...]
    tilt_steps: tuple[float, ...]
    zoom_factors: tuple[float, ...]

    def __post_init__(self):
        for name, values, identity in (
            ("pan_steps", self.pan_steps, 0.0),
            ("tilt_steps", self.tilt_steps, 0.0),
            ("zoom_factors", self.zoom_factors, 1.0),
        ):
            if len(values) == 0:
                raise ValueError(f"{name} must be non-empty")
            if min(abs(v - identity) for v in values) > 1e-12:
                raise ValueError(f"{name} must contain the identity {identity}")

    @classmethod
    def default(cls) -> "PtzGrid":
        return cls(
            pan_steps=symmetric_steps(0.35, 21),
            tilt_steps=symmetric_steps(12.0, 9),
            zoom_factors=(0.7, 0.85, 1.0, 1.2, 1.45),
        )

    def __len__(self) -> int:
        return len(self.pan_steps) * len(self.tilt_steps) * len(self.zoom_factors)


@dataclass(frozen=True, eq=False)
class DictionaryEntry:
    """One synthetic view: homography, boundary quad, camera, edges, HOG."""

    h: np.ndarray
    quad: np.ndarray
    cam: CameraParams
    edges: np.ndarray
    hog: np.ndarray


def simulate_pan(q: np.ndarray, delta: float) -> np.ndarray:
    """Rotate the quad about the convergence point of its side lines."""
    q = check_quad(q)
    if delta == 0.0:
        return q.copy()
    c = convergence_point(q)
    cos, sin = np.cos(delta), np.sin(delta)
    rot = np.array([[cos, -sin], [sin, cos]])
    return (q - c) @ rot.T + c


def simulate_tilt(q: np.ndarray, delta_m: float) -> np.ndarray:
    """Slide the quad along its side lines, away from (or toward) the
    convergence point for positive (negative) delta_m."""
    q = check_quad(q)
    if delta_m == 0.0:
        return q.copy()
    c = convergence_point(q)
    da = q[3] - q[0]
    db = q[2] - q[1]
    da = da / np.linalg.norm(da)
    db = db / np.linalg.norm(db)
    out = q + delta_m * np.array([da, db, db, da])
    # The near corners must stay strictly on the camera side of C.
    if np.dot(out[0] - c, da) <= 1e-9 or np.dot(out[1] - c, db) <= 1e-9:
        raise DegenerateQuad("tilt moved the near edge across the convergence point")
    if polygon_area(out) <= 1e-9:
        raise DegenerateQuad("tilt collapsed the quad")
    return out


def simulate_zoom(q: np.ndarray, factor: float) -> np.ndarray:
    """Scale the quad about its centroid; factor > 1 widens the view."""
    q = check_quad(q)
    if not 0.2 <= factor <= 5.0:
        raise ValueError(f"zoom factor {factor} outside [0.2, 5]")
    centroid = q.mean(axis=0)
    out = centroid + factor * (q - centroid)
    if polygon_area(out) <= 1e-9:
        raise DegenerateQuad("zoom collapsed the quad")
    return out


def seed_quad(seed: SeedAnnotation, raster_size: tuple[int, int]) -> np.ndarray:
    """Projection of the reference raster boundary under the seed homography."""
    w, h = raster_size
    return warp_quad(seed.homography(), rect_quad(float(w), float(h)))


def entry_from_quad(
    quad: np.ndarray,
    model: PitchModel,
    raster_size: tuple[int, int] = DEFAULT_RASTER_SIZE,
    hog_config: HogConfig = HogConfig(),
) -> DictionaryEntry | None:
    """Synthesize a dictionary entry for one boundary quad.

    Returns None when the rendered view has fewer than 50 set pixels or
    the camera parameters cannot be extracted; geometry errors propagate.
    """
    w, h = raster_size
    rect = rect_quad(float(w), float(h))
    homography = estimate_dlt(rect, quad)
    quad = warp_quad(homography, rect)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyRenderWarning)
        edges = render_camera_view(model, homography, w, h)
    if int(edges.sum()) < MIN_EDGE_PIXELS:
        return None
    try:
        cam = quad_to_camera(quad)
    except PitchRegError:
        return None
    return DictionaryEntry(homography, quad, cam, edges, hog(edges, hog_config))


def _expand_seed_pan(seed_q, pan, tilts, zooms, model, raster_size, hog_config):
    """All (tilt, zoom) entries under one (seed, pan) combination."""
    out = []
    try:
        panned = simulate_pan(seed_q, pan)
    except PitchRegError:
        return [None] * (len(tilts) * len(zooms))
    for tilt in tilts:
        try:
            tilted = simulate_tilt(panned, tilt)
        except PitchRegError:
            out.extend([None] * len(zooms))
            continue
        for zoom in zooms:
            try:
                out.append(
                    entry_from_quad(
                        simulate_zoom(tilted, zoom), model, raster_size, hog_config
                    )
                )
            except PitchRegError:
                out.append(None)
    return out


def build_dictionary(
    seeds,
    grid: PtzGrid,
    model: PitchModel,
    raster_size: tuple[int, int] = DEFAULT_RASTER_SIZE,
    hog_config: HogConfig = HogConfig(),
    n_jobs: int | None = None,
) -> "Dictionary":
    """Expand seeds over the PTZ grid into a dictionary.

    Entries are ordered seed-major, then pan, tilt, zoom (pan applied
    first, then tilt, then zoom); invalid combinations are dropped.  The
    output is deterministic and independent of ``n_jobs``.
    """
    seeds = list(seeds)
    if not seeds:
        raise NoValidEntries("no seeds given")
    tasks = [
        (seed_quad(seed, raster_size), pan)
        for seed in seeds
        for pan in grid.pan_steps
    ]
    args = (grid.tilt_steps, grid.zoom_factors, model, raster_size, hog_config)
    if n_jobs is None or n_jobs == 1:
        chunks = (_expand_seed_pan(sq, pan, *args) for sq, pan in tasks)
    else:
        chunks = Parallel(n_jobs=n_jobs, return_as="generator")(
            delayed(_expand_seed_pan)(sq, pan, *args) for sq, pan in tasks
        )
    entries = [e for chunk in chunks for e in chunk if e is not None]
    if not entries:
        raise NoValidEntries("every grid combination was rejected")
    return Dictionary.from_entries(entries, raster_size, hog_config)


class Dictionary:
    """Immutable, search-ready collection of synthetic entries.

    Edge maps are held bit-packed; flattened set-pixel indices are
    precomputed for chamfer scoring and the HOG descriptors form one
    float32 matrix for vectorized scans.
    """

    def __init__(
        self,
        raster_size: tuple[int, int],
        hog_config: HogConfig,
        homographies: np.ndarray,
        cams: np.ndarray,
        hog_matrix: np.ndarray,
        packed_edges: np.ndarray,
        h_scales: np.ndarray | None = None,
    ):
        self.raster_size = (int(raster_size[0]), int(raster_size[1]))
        self.hog_config = hog_config
        self.homographies = np.asarray(homographies, dtype=np.float64)
        self.cams = np.asarray(cams, dtype=np.float64)
        self.hog_matrix = np.ascontiguousarray(hog_matrix, dtype=np.float32)
        self.packed_edges = np.ascontiguousarray(packed_edges, dtype=np.uint8)
        n = len(self.homographies)
        if not (len(self.cams) == len(self.hog_matrix) == len(self.packed_edges) == n):
            raise ValueError("entry arrays disagree in length")
        self.params8 = self.homographies.reshape(n, 9)[:, :8].copy()
        if h_scales is None:
            h_scales = self.params8.std(axis=0) if n > 1 else np.zeros(8)
            h_scales = np.maximum(h_scales, 1e-9)
        self.h_scales = np.asarray(h_scales, dtype=np.float64)
        self._build_chamfer_index()
        w, h = self.raster_size
        self.quads = np.stack(
            [warp_quad(hm, rect_quad(float(w), float(h))) for hm in self.homographies]
        ) if n else np.empty((0, 4, 2))

    def _build_chamfer_index(self):
        w, h = self.raster_size
        npx = w * h
        idx_parts = []
        counts = np.zeros(len(self), dtype=np.int64)
        chunk = max(1, (1 << 24) // max(npx, 1))
        for start in range(0, len(self), chunk):
            stop = min(start + chunk, len(self))
            bits = np.unpackbits(self.packed_edges[start:stop], axis=1, count=npx)
            rows, cols = np.nonzero(bits)
            idx_parts.append(cols.astype(np.int64))
            counts[start:stop] = np.bincount(rows, minlength=stop - start)
        if np.any(counts == 0) and len(self) > 0:
            raise NoValidEntries("dictionary contains an empty edge map")
        self.chamfer_counts = counts
        self.chamfer_offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(
            np.int64
        )
        self.chamfer_indices = (
            np.concatenate(idx_parts) if idx_parts else np.empty(0, dtype=np.int64)
        )

    def __len__(self) -> int:
        return len(self.homographies)

    def edges(self, i: int) -> np.ndarray:
        """Unpack the i-th entry's edge map."""
        w, h = self.raster_size
        return np.unpackbits(self.packed_edges[i], count=w * h).reshape(h, w)

    def entry(self, i: int) -> DictionaryEntry:
        return DictionaryEntry(
            h=self.homographies[i],
            quad=self.quads[i],
            cam=CameraParams.from_array(self.cams[i]),
            edges=self.edges(i),
            hog=self.hog_matrix[i],
        )

    def fingerprint(self) -> str:
        """Stable content hash over geometry, configuration and entries."""
        md = hashlib.sha256()
        md.update(struct.pack("<II", *self.raster_size))
        cfg = self.hog_config
        md.update(
            struct.pack(
                "<IIIIBd",
                cfg.cell_px,
                cfg.block_cells,
                cfg.stride_cells,
                cfg.bins,
                int(cfg.blur),
                cfg.norm_eps,
            )
        )
        md.update(self.h_scales.tobytes())
        md.update(self.homographies.tobytes())
        md.update(self.packed_edges.tobytes())
        return md.hexdigest()

    @classmethod
    def from_entries(
        cls,
        entries,
        raster_size: tuple[int, int] = DEFAULT_RASTER_SIZE,
        hog_config: HogConfig = HogConfig(),
    ) -> "Dictionary":
        entries = list(entries)
        if not entries:
            raise NoValidEntries("no entries")
        w, h = raster_size
        homographies = np.stack([canonicalize(e.h) for e in entries])
        cams = np.stack([e.cam.as_array() for e in entries])
        hog_matrix = np.stack([e.hog for e in entries])
        packed = np.stack(
            [np.packbits(e.edges.reshape(-1).astype(np.uint8)) for e in entries]
        )
        return cls(raster_size, hog_config, homographies, cams, hog_matrix, packed)

    def save(self, path: str) -> None:
        """Write the PTVD v1 binary file."""
        w, h = self.raster_size
        cfg = self.hog_config
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(
                struct.pack(
                    "<IIIIIIIBd",
                    _VERSION,
                    w,
                    h,
                    cfg.cell_px,
                    cfg.block_cells,
                    cfg.stride_cells,
                    cfg.bins,
                    int(cfg.blur),
                    cfg.norm_eps,
                )
            )
            fh.write(self.h_scales.astype("<f8").tobytes())
            fh.write(struct.pack("<I", len(self)))
            npx = w * h
            for i in range(len(self)):
                fh.write(self.homographies[i].astype("<f8").tobytes())
                fh.write(self.cams[i].astype("<f8").tobytes())
                hog_row = self.hog_matrix[i].astype("<f4")
                fh.write(struct.pack("<I", len(hog_row)))
                fh.write(hog_row.tobytes())
                bits = np.unpackbits(self.packed_edges[i], count=npx)
                runs = _rle_encode(bits)
                fh.write(struct.pack("<I", len(runs)))
                fh.write(runs.astype("<u4").tobytes())

    @classmethod
    def load(cls, path: str) -> "Dictionary":
        """Read a PTVD v1 binary file."""
        with open(path, "rb") as fh:
            buf = fh.read()
        if buf[:4] != _MAGIC:
            raise ValueError(f"{path}: not a PTVD dictionary file")
        off = 4
        version, w, h, cell, block, stride, bins, blur, norm_eps = struct.unpack_from(
            "<IIIIIIIBd", buf, off
        )
        off += struct.calcsize("<IIIIIIIBd")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported PTVD version {version}")
        cfg = HogConfig(
            cell_px=cell,
            block_cells=block,
            stride_cells=stride,
            bins=bins,
            blur=bool(blur),
            norm_eps=norm_eps,
        )
        h_scales = np.frombuffer(buf, dtype="<f8", count=8, offset=off).astype(
            np.float64
        )
        off += 64
        (count,) = struct.unpack_from("<I", buf, off)
        off += 4
        npx = w * h
        homographies = np.empty((count, 3, 3))
        cams = np.empty((count, 6))
        hog_rows = []
        packed = np.empty((count, (npx + 7) // 8), dtype=np.uint8)
        for i in range(count):
            homographies[i] = np.frombuffer(
                buf, dtype="<f8", count=9, offset=off
            ).reshape(3, 3)
            off += 72
            cams[i] = np.frombuffer(buf, dtype="<f8", count=6, offset=off)
            off += 48
            (hog_len,) = struct.unpack_from("<I", buf, off)
            off += 4
            hog_rows.append(np.frombuffer(buf, dtype="<f4", count=hog_len, offset=off))
            off += 4 * hog_len
            (n_runs,) = struct.unpack_from("<I", buf, off)
            off += 4
            runs = np.frombuffer(buf, dtype="<u4", count=n_runs, offset=off)
            off += 4 * n_runs
            packed[i] = np.packbits(_rle_decode(runs, npx))
        hog_matrix = (
            np.stack(hog_rows) if hog_rows else np.empty((0, 0), dtype=np.float32)
        )
        return cls((w, h), cfg, homographies, cams, hog_matrix, packed, h_scales)


def _rle_encode(bits: np.ndarray) -> np.ndarray:
    """Alternating run lengths of 0s and 1s, starting with a 0-run."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    changes = np.flatnonzero(np.diff(bits)) + 1
    bounds = np.concatenate([[0], changes, [len(bits)]])
    runs = np.diff(bounds)
    if len(bits) and bits[0] == 1:
        runs = np.concatenate([[0], runs])
    return runs.astype(np.uint32)


def _rle_decode(runs: np.ndarray, n: int) -> np.ndarray:
    values = np.zeros(len(runs), dtype=np.uint8)
    values[1::2] = 1
    bits = np.repeat(values, runs.astype(np.int64))
    if len(bits) != n:
        raise ValueError(f"RLE stream decodes to {len(bits)} bits, expected {n}")
    return bits


def read_seed_file(path: str) -> list[SeedAnnotation]:
    """Read seed annotations: image_id plus 4x (u v x y) per line."""
    seeds = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if len(tok) != 17:
                raise ValueError(f"{path}:{lineno}: expected image_id + 16 numbers")
            vals = np.array([float(t) for t in tok[1:]]).reshape(4, 4)
            seeds.append(SeedAnnotation(tok[0], vals[:, :2], vals[:, 2:]))
    if not seeds:
        raise ValueError(f"{path}: no seed annotations found")
    return seeds


def write_seed_file(path: str, seeds) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seed in seeds:
            nums = np.column_stack([seed.image_points, seed.model_points]).ravel()
            fh.write(seed.image_id + " " + " ".join(repr(float(v)) for v in nums) + "\n")
