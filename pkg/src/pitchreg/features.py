"""Edge-map features: Euclidean distance transform, chamfer score and HOG.

The chamfer score of a template against a query's distance field is the
mean distance from each template pixel to the query's nearest edge pixel.
The HOG descriptor uses unsigned orientations over the spread gradients
of the binary raster; its configuration travels with the dictionary so
query-time extraction matches build-time extraction bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BadGeometry, DimensionMismatch, EmptyEdgeMap, EmptyTemplate


def check_edge_map(e: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Validate a binary edge map and return it as a 0/1 uint8 array."""
    e = np.asarray(e)
    if e.ndim != 2:
        raise ValueError(f"edge map must be 2-D, got shape {e.shape}")
    if shape is not None and e.shape != shape:
        raise DimensionMismatch(f"expected raster {shape}, got {e.shape}")
    if e.dtype != np.uint8:
        e = e.astype(np.uint8)
    if e.max(initial=0) > 1:
        e = (e > 0).astype(np.uint8)
    return e


def distance_transform(e: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance (in pixels) to the nearest set pixel.

    Raises:
        EmptyEdgeMap: if the edge map has no set pixels.
    """
    e = check_edge_map(e)
    if not e.any():
        raise EmptyEdgeMap("distance transform of an empty edge map")
    return ndimage.distance_transform_edt(e == 0)


def chamfer_score(t: np.ndarray, template: np.ndarray) -> float:
    """Mean of the distance field over the template's set pixels.

    Args:
        t: distance field of the query edge map.
        template: binary edge map scored against the field.

    Raises:
        DimensionMismatch: if shapes differ.
        EmptyTemplate: if the template has no set pixels.
    """
    t = np.asarray(t, dtype=np.float64)
    template = check_edge_map(template)
    if t.shape != template.shape:
        raise DimensionMismatch(f"field {t.shape} vs template {template.shape}")
    count = int(template.sum())
    if count == 0:
        raise EmptyTemplate("chamfer template has no set pixels")
    return float(t[template > 0].sum() / count)


@dataclass(frozen=True)
class HogConfig:
    """Geometry and preprocessing of the HOG extraction.

    cell_px: square cell side in pixels.
    block_cells: cells per block side (blocks slide with stride_cells).
    bins: unsigned orientation bins over [0, 180) degrees.
    blur: spread the binary raster (3x3 dilation + 3x3 box blur) before
        differentiating; raw binary gradients are degenerate without it.
    norm_eps: added under the square root of the per-block L2 norm.
    """

    cell_px: int = 8
    block_cells: int = 2
    stride_cells: int = 1
    bins: int = 9
    blur: bool = True
    norm_eps: float = 1e-3

    def grid_shape(self, shape: tuple[int, int]) -> tuple[int, int, int, int]:
        """(cells_y, cells_x, blocks_y, blocks_x) for a raster shape."""
        h, w = shape
        if h % self.cell_px or w % self.cell_px:
            raise BadGeometry(f"raster {w}x{h} not divisible by cell {self.cell_px}")
        cy, cx = h // self.cell_px, w // self.cell_px
        by = (cy - self.block_cells) // self.stride_cells + 1
        bx = (cx - self.block_cells) // self.stride_cells + 1
        if by < 1 or bx < 1:
            raise BadGeometry("raster too small for one block")
        return cy, cx, by, bx

    def descriptor_length(self, shape: tuple[int, int]) -> int:
        _, _, by, bx = self.grid_shape(shape)
        return by * bx * self.block_cells ** 2 * self.bins


def _spread(e: np.ndarray) -> np.ndarray:
    """1-px dilation (3x3 square) followed by a 3x3 box blur, zero padded."""
    p = np.pad(e > 0, 1)
    dilated = np.zeros(e.shape, dtype=bool)
    for dy in range(3):
        for dx in range(3):
            dilated |= p[dy : dy + e.shape[0], dx : dx + e.shape[1]]
    return ndimage.uniform_filter(dilated.astype(np.float64), size=3, mode="constant")


def hog(e: np.ndarray, cfg: HogConfig = HogConfig()) -> np.ndarray:
    """Block-normalized histogram-of-oriented-gradients descriptor.

    Gradients are centered differences (zero padded at the borders) of the
    optionally spread raster; each pixel votes its magnitude into the two
    nearest unsigned orientation bins.  Blocks are concatenated row-major;
    returns a float32 vector of ``cfg.descriptor_length(e.shape)``.
    """
    e = check_edge_map(e)
    cy, cx, by, bx = cfg.grid_shape(e.shape)

    img = _spread(e) if cfg.blur else e.astype(np.float64)
    padded = np.pad(img, 1)
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0

    # Orientation work only where a gradient exists (edge maps are sparse).
    ys, xs = np.nonzero((gx != 0.0) | (gy != 0.0))
    vx, vy = gx[ys, xs], gy[ys, xs]
    mag = np.hypot(vx, vy)
    ang = np.mod(np.arctan2(vy, vx), np.pi)

    # Bilinear vote between the two nearest bin centers at (i + 0.5)*pi/bins.
    pos = ang / np.pi * cfg.bins - 0.5
    lo = np.floor(pos)
    frac = pos - lo
    bin_lo = np.mod(lo, cfg.bins).astype(np.intp)
    bin_hi = np.mod(lo + 1, cfg.bins).astype(np.intp)

    base = ((ys // cfg.cell_px) * cx + xs // cfg.cell_px) * cfg.bins
    nhist = cy * cx * cfg.bins
    hist = np.bincount(base + bin_lo, weights=mag * (1.0 - frac), minlength=nhist)
    hist += np.bincount(base + bin_hi, weights=mag * frac, minlength=nhist)
    hist = hist.reshape(cy, cx, cfg.bins)

    bc = cfg.block_cells
    windows = np.lib.stride_tricks.sliding_window_view(hist, (bc, bc), axis=(0, 1))
    blocks = windows[:: cfg.stride_cells, :: cfg.stride_cells]
    # (by, bx, bins, bc, bc) -> cells row-major within each block.
    blocks = np.ascontiguousarray(blocks.transpose(0, 1, 3, 4, 2))
    blocks = blocks.reshape(by, bx, bc * bc * cfg.bins)
    norms = np.sqrt((blocks ** 2).sum(axis=-1, keepdims=True) + cfg.norm_eps)
    return (blocks / norms).reshape(-1).astype(np.float32)
