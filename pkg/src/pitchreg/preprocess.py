"""Broadcast-frame preprocessing: field masking and stroke-width filtering.

Turns an RGB frame into a field-lines-only binary edge map at the
dictionary raster size.  The field is segmented by hue, reduced to its
largest connected component and filled with its convex hull; edge pixels
inside the mask are kept only when the ray cast along their gradient hits
an opposing edge within the stroke-width limit, which removes players,
crowd and other thick structures while preserving thin line markings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .errors import EmptyEdgeMap, FieldNotFound

SATURATION_MIN = 0.15
OPPOSITION_COS = -np.cos(np.pi / 6.0)


@dataclass(frozen=True)
class PreprocessConfig:
    """Field segmentation and stroke filtering parameters.

    hue_window: inclusive hue range (degrees) treated as field green.
    min_field_fraction: minimum mask coverage before FieldNotFound.
    max_stroke_px: strokes wider than this are discarded.
    gradient_threshold: luminance-gradient magnitude for edge pixels
        (0-255 luminance scale).
    """

    hue_window: tuple[float, float] = (70.0, 170.0)
    min_field_fraction: float = 0.3
    max_stroke_px: int = 10
    gradient_threshold: float = 15.0

    def __post_init__(self):
        if self.hue_window[0] >= self.hue_window[1]:
            raise ValueError("hue window must be (lo, hi) with lo < hi")
        if self.max_stroke_px < 1:
            raise ValueError("max_stroke_px must be >= 1")
        if not 0.0 < self.min_field_fraction < 1.0:
            raise ValueError("min_field_fraction must be in (0, 1)")


def check_frame(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError(f"frame must be (h, w, 3), got {frame.shape}")
    if frame.dtype != np.uint8:
        raise ValueError("frame must be 8-bit RGB")
    return frame


def _hue_saturation(frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel hue (degrees) and saturation from 8-bit RGB."""
    rgb = frame.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=2)
    minc = rgb.min(axis=2)
    delta = maxc - minc
    sat = np.where(maxc > 0, delta / np.maximum(maxc, 1e-12), 0.0)
    hue = np.zeros_like(maxc)
    nz = delta > 0
    rmax = nz & (maxc == r)
    gmax = nz & (maxc == g) & ~rmax
    bmax = nz & ~rmax & ~gmax
    hue[rmax] = np.mod((g - b)[rmax] / delta[rmax], 6.0)
    hue[gmax] = (b - r)[gmax] / delta[gmax] + 2.0
    hue[bmax] = (r - g)[bmax] / delta[bmax] + 4.0
    return hue * 60.0, sat


def _fill_convex_hull(mask: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(mask)
    pts = np.column_stack([xs, ys]).astype(np.float64)
    try:
        hull = ConvexHull(pts)
    except (QhullError, ValueError):
        return mask.copy()
    verts = pts[hull.vertices]
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    gx, gy = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    inside = np.ones(gx.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        inside &= (bx - ax) * (gy - ay) - (by - ay) * (gx - ax) >= -1e-9
    out = np.zeros_like(mask)
    out[y0 : y1 + 1, x0 : x1 + 1] = inside
    return out


def field_mask(frame: np.ndarray, cfg: PreprocessConfig = PreprocessConfig()) -> np.ndarray:
    """Boolean mask of the playing field.

    Keeps hue-window pixels with saturation above 0.15, reduces to the
    largest 4-connected component and fills its convex hull.

    Raises:
        FieldNotFound: if the filled mask covers less than
            cfg.min_field_fraction of the frame.
    """
    frame = check_frame(frame)
    hue, sat = _hue_saturation(frame)
    lo, hi = cfg.hue_window
    green = (hue >= lo) & (hue <= hi) & (sat > SATURATION_MIN)
    if green.any():
        labels, n = ndimage.label(
            green, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
        )
        sizes = np.bincount(labels.ravel())
        sizes[0] = 0
        component = labels == sizes.argmax()
        mask = _fill_convex_hull(component)
    else:
        mask = green
    fraction = float(mask.mean())
    if fraction < cfg.min_field_fraction:
        raise FieldNotFound(
            f"field mask covers {fraction:.2f} < {cfg.min_field_fraction} of the frame"
        )
    return mask


def stroke_filtered_edges(
    frame: np.ndarray,
    mask: np.ndarray,
    cfg: PreprocessConfig = PreprocessConfig(),
    out_size: tuple[int, int] = (256, 144),
) -> np.ndarray:
    """Thin-stroke edge map of the field lines at the dictionary raster.

    Edge pixels (luminance gradient above threshold, inside the mask) cast
    a ray along their gradient; the stroke width is the distance to the
    first edge pixel with an opposing gradient (within pi/6).  Pixels with
    stroke width <= cfg.max_stroke_px survive and are max-pooled down to
    ``out_size``.

    Raises:
        EmptyEdgeMap: if no pixel survives the filter.
    """
    frame = check_frame(frame)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != frame.shape[:2]:
        raise ValueError("mask shape must match the frame")
    if not mask.any():
        raise EmptyEdgeMap("field mask is empty")
    h, w = mask.shape

    luma = frame.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
    padded = np.pad(luma, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    gmag = np.hypot(gx, gy)
    is_edge = (gmag >= cfg.gradient_threshold) & mask

    ys, xs = np.nonzero(is_edge)
    if len(ys) == 0:
        raise EmptyEdgeMap("no gradient pixels inside the field mask")
    dir_x = gx[ys, xs] / gmag[ys, xs]
    dir_y = gy[ys, xs] / gmag[ys, xs]

    width = np.full(len(ys), np.inf)
    active = np.ones(len(ys), dtype=bool)
    for step in range(1, cfg.max_stroke_px + 2):
        px = np.rint(xs + step * dir_x).astype(np.int64)
        py = np.rint(ys + step * dir_y).astype(np.int64)
        inb = active & (px >= 0) & (px < w) & (py >= 0) & (py < h)
        pxc = np.clip(px, 0, w - 1)
        pyc = np.clip(py, 0, h - 1)
        hit = inb & is_edge[pyc, pxc]
        if np.any(hit):
            # Opposing gradient: direction at the hit pixel within pi/6
            # of the reversed ray direction.
            cos = (
                dir_x[hit] * gx[pyc[hit], pxc[hit]] + dir_y[hit] * gy[pyc[hit], pxc[hit]]
            ) / np.maximum(gmag[pyc[hit], pxc[hit]], 1e-12)
            opposing = cos <= OPPOSITION_COS
            sel = np.flatnonzero(hit)[opposing]
            width[sel] = np.hypot(px[sel] - xs[sel], py[sel] - ys[sel])
            active[sel] = False
        if not active.any():
            break

    keep = width <= cfg.max_stroke_px
    if not np.any(keep):
        raise EmptyEdgeMap("no stroke survived the width filter")

    out_w, out_h = out_size
    ox = np.minimum((xs[keep] * out_w) // w, out_w - 1)
    oy = np.minimum((ys[keep] * out_h) // h, out_h - 1)
    edges = np.zeros((out_h, out_w), dtype=np.uint8)
    edges[oy, ox] = 1
    return edges


def preprocess_frame(
    frame: np.ndarray,
    cfg: PreprocessConfig = PreprocessConfig(),
    out_size: tuple[int, int] = (256, 144),
) -> np.ndarray:
    """Full pipeline: field mask then stroke-filtered edge map."""
    return stroke_filtered_edges(frame, field_mask(frame, cfg), cfg, out_size)


# -- image I/O ----------------------------------------------------------------

def load_frame(path: str) -> np.ndarray:
    """Load a PNG/PPM/JPEG frame as (h, w, 3) uint8 RGB."""
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def save_png(path: str, frame: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(check_frame(frame)).save(path, format="PNG")


def write_pbm(path: str, edges: np.ndarray) -> None:
    """Write an edge map as binary PBM (set pixels are black)."""
    edges = (np.asarray(edges) > 0).astype(np.uint8)
    h, w = edges.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(np.packbits(edges, axis=1).tobytes())


def read_pbm(path: str) -> np.ndarray:
    """Read a PBM file as a 0/1 uint8 edge map (black pixels are edges)."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 3 and pos < len(data):
        # Tokenize the header, skipping whitespace and '#' comments.
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic, w, h = tokens[0], int(tokens[1]), int(tokens[2])
    if magic == b"P4":
        pos += 1  # single whitespace byte after the header
        stride = (w + 7) // 8
        rows = np.frombuffer(
            data, dtype=np.uint8, count=h * stride, offset=pos
        ).reshape(h, stride)
        return np.unpackbits(rows, axis=1)[:, :w]
    if magic == b"P1":
        bits = [c for c in data[pos:].split() if c in (b"0", b"1")]
        return np.array(bits, dtype=np.uint8).reshape(h, w)
    raise ValueError(f"{path}: unsupported PBM magic {magic!r}")
