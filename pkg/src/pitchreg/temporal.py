"""Video-level refinement: camera parametrization, MRF smoothing, stabilization.

A projected image-boundary quad is reduced to six camera parameters: the
ground projection of the camera center (cx, cy), the pan angle theta of
the view-cone bisector, the angular width phi between the side lines, and
the bisector distances r1 < r2 of the near and far clipping lines.  The
MRF stage picks one registration candidate per frame by dynamic
programming; the stabilizer solves a convex L1-trend objective over the
six-parameter path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import (
    BisectorMiss,
    EmptyCandidates,
    InvalidParams,
    NormalizationImpossible,
    SolverDiverged,
)
from .geometry import canonicalize, check_quad, convergence_point, estimate_dlt, rect_quad

PHI_MIN = 1e-4
DIST_FLOOR = 1e-12


@dataclass(frozen=True)
class CameraParams:
    """Six-parameter projected-plane camera parametrization.

    cx, cy are meters; theta is the bisector direction, phi the angle
    between the side lines (radians); r1 < r2 are the bisector distances
    (meters) to the near and far clipping lines.
    """

    cx: float
    cy: float
    theta: float
    phi: float
    r1: float
    r2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_array()):
            raise InvalidParams("camera parameters must be finite")
        if not PHI_MIN <= self.phi < math.pi:
            raise InvalidParams(f"phi={self.phi} outside [{PHI_MIN}, pi)")
        if not 0.0 < self.r1 < self.r2:
            raise InvalidParams(f"need 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.theta, self.phi, self.r1, self.r2])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "CameraParams":
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class StatePath:
    """Selected candidate index per frame (0-based ranks)."""

    states: tuple[int, ...]


@dataclass(frozen=True)
class SmoothingWeights:
    """Stabilization weights; parameters are divided by param_scales first.

    Default scales put meters on a 10 m unit and angles on a 0.1 rad unit
    so the three lambdas are comparable across parameters.
    """

    lambda1: float = 0.1
    lambda2: float = 1.0
    lambda3: float = 10.0
    param_scales: tuple[float, ...] = (10.0, 10.0, 0.1, 0.1, 10.0, 10.0)

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ValueError("lambdas must be non-negative")
        if max(self.lambda1, self.lambda2, self.lambda3) == 0:
            raise ValueError("at least one lambda must be positive")
        if any(s <= 0 for s in self.param_scales):
            raise ValueError("param_scales must be positive")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _ray_segment_intersection(
    origin: np.ndarray, direction: np.ndarray, a: np.ndarray, b: np.ndarray
) -> float:
    """Distance along the ray to segment ab, or raise BisectorMiss."""
    seg = b - a
    denom = direction[0] * seg[1] - direction[1] * seg[0]
    if abs(denom) < 1e-15:
        raise BisectorMiss("bisector is parallel to the clipping segment")
    rhs = a - origin
    r = (rhs[0] * seg[1] - rhs[1] * seg[0]) / denom
    s = (direction[1] * rhs[0] - direction[0] * rhs[1]) / denom
    if r <= 0.0 or not -1e-9 <= s <= 1.0 + 1e-9:
        raise BisectorMiss("bisector does not cross the clipping segment")
    return float(r)


def quad_to_camera(q: np.ndarray) -> CameraParams:
    """Extract the six camera parameters from a projected boundary quad.

    Raises:
        ParallelSides: if the side lines do not converge.
        BisectorMiss: if the bisector misses the near or far edge.
        InvalidParams: if the resulting parameters violate their invariants.
    """
    q = check_quad(q)
    c = convergence_point(q)
    da = _unit(q[3] - q[0])
    db = _unit(q[2] - q[1])
    # Side directions point from the near corners away from the camera.
    if np.dot(q[0] - c, da) < 0 and np.dot(q[3] - c, da) < 0:
        da = -da
    if np.dot(q[1] - c, db) < 0 and np.dot(q[2] - c, db) < 0:
        db = -db
    bisector = da + db
    norm = np.linalg.norm(bisector)
    if norm < 1e-12:
        raise BisectorMiss("side directions are opposed; no bisector")
    u = bisector / norm
    theta = float(math.atan2(u[1], u[0]))
    phi = float(math.atan2(abs(da[0] * db[1] - da[1] * db[0]), float(np.dot(da, db))))
    r1 = _ray_segment_intersection(c, u, q[0], q[1])
    r2 = _ray_segment_intersection(c, u, q[3], q[2])
    return CameraParams(float(c[0]), float(c[1]), theta, phi, r1, r2)


def camera_to_quad(cam: CameraParams) -> np.ndarray:
    """Reconstruct the boundary quad from camera parameters.

    The near and far edges are perpendicular to the bisector, crossing it
    at distances r1 and r2; corners lie on the rays at theta +- phi/2.
    """
    c = np.array([cam.cx, cam.cy])
    half = cam.phi / 2.0
    cos_half = math.cos(half)
    if cos_half <= 1e-12:
        raise InvalidParams("phi too close to pi")
    d1 = cam.r1 / cos_half
    d2 = cam.r2 / cos_half
    left = np.array([math.cos(cam.theta + half), math.sin(cam.theta + half)])
    right = np.array([math.cos(cam.theta - half), math.sin(cam.theta - half)])
    quad = np.array([c + d1 * left, c + d1 * right, c + d2 * right, c + d2 * left])
    return check_quad(quad)


def homography_distance(a: np.ndarray, b: np.ndarray, scales: np.ndarray) -> float:
    """Scaled Euclidean distance between two canonical homographies.

    The eight non-unit entries are divided entrywise by ``scales`` before
    taking the L2 norm, so all parameters contribute on a similar range.

    Raises:
        NormalizationImpossible: if either matrix has a zero lower-right
            entry (no m22=1 canonical form exists).
    """
    scales = np.asarray(scales, dtype=np.float64)
    if scales.shape != (8,) or np.any(scales <= 0):
        raise ValueError("scales must be 8 positive reals")
    pa = _canonical_params8(a)
    pb = _canonical_params8(b)
    return float(np.linalg.norm((pa - pb) / scales))


def _canonical_params8(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if abs(h[2, 2]) <= 1e-12:
        raise NormalizationImpossible("homography has zero lower-right entry")
    return canonicalize(h).ravel()[:8]


def mrf_smooth(
    candidate_sets,
    homographies: np.ndarray,
    scales: np.ndarray,
    w_smooth: float = 1.0,
) -> StatePath:
    """Select one candidate per frame by exact dynamic programming.

    Minimizes the sum of per-frame data costs log(max(distance, 1e-12))
    plus ``w_smooth`` times the scaled homography distance between
    consecutive selections.  Among all minimizing paths the
    lexicographically smallest (ties toward lower candidate index, frame
    by frame) is returned.

    Args:
        candidate_sets: per-frame objects exposing ``candidates`` with
            ``entry_index`` and ``distance`` fields, all non-empty.
        homographies: (n, 3, 3) canonical homographies indexed by
            entry_index.
        scales: 8-vector normalizing the homography entries.
        w_smooth: weight of the smoothness term.

    Returns:
        StatePath of 0-based candidate ranks, one per frame.
    """
    if len(candidate_sets) == 0:
        raise EmptyCandidates("no frames to smooth")
    scales = np.asarray(scales, dtype=np.float64)
    params = []
    datas = []
    for t, cs in enumerate(candidate_sets):
        cands = cs.candidates
        if len(cands) == 0:
            raise EmptyCandidates(f"frame {t} has no candidates")
        dist = np.array([c.distance for c in cands], dtype=np.float64)
        datas.append(np.log(np.maximum(dist, DIST_FLOOR)))
        params.append(
            np.stack(
                [_canonical_params8(homographies[c.entry_index]) / scales for c in cands]
            )
        )
    n = len(datas)
    # Backward pass: best suffix cost from each state, then a greedy
    # forward selection yields the lexicographically smallest optimum.
    suffix = [None] * n
    suffix[n - 1] = datas[n - 1]
    for t in range(n - 2, -1, -1):
        pair = w_smooth * np.linalg.norm(
            params[t][:, None, :] - params[t + 1][None, :, :], axis=2
        )
        suffix[t] = datas[t] + (pair + suffix[t + 1][None, :]).min(axis=1)
    states = [int(np.argmin(suffix[0]))]
    for t in range(1, n):
        prev = params[t - 1][states[-1]]
        pair = w_smooth * np.linalg.norm(params[t] - prev[None, :], axis=1)
        states.append(int(np.argmin(pair + suffix[t])))
    return StatePath(tuple(states))


def mrf_objective(
    candidate_sets,
    homographies: np.ndarray,
    scales: np.ndarray,
    w_smooth: float,
    states,
) -> float:
    """Energy of a state path under the mrf_smooth objective."""
    states = list(getattr(states, "states", states))
    total = 0.0
    prev = None
    for cs, s in zip(candidate_sets, states):
        cand = cs.candidates[s]
        total += math.log(max(cand.distance, DIST_FLOOR))
        cur = _canonical_params8(homographies[cand.entry_index]) / np.asarray(scales)
        if prev is not None:
            total += w_smooth * float(np.linalg.norm(cur - prev))
        prev = cur
    return total


def _difference_matrix(n: int, order: int) -> sparse.csr_matrix:
    d = sparse.eye(n, format="csc")
    for _ in range(order):
        m = d.shape[0]
        d = sparse.diags([-1.0, 1.0], [0, 1], shape=(m - 1, m)) @ d
    return d.tocsr()


def trend_objective(x: np.ndarray, data: np.ndarray, lambdas) -> float:
    """Data term plus weighted L1 norms of the first three differences."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64).T).T
    data = np.atleast_2d(np.asarray(data, dtype=np.float64).T).T
    total = float(((x - data) ** 2).sum())
    for lam, order in zip(lambdas, (1, 2, 3)):
        if lam > 0 and len(x) > order:
            d = np.diff(x, n=order, axis=0)
            total += lam * float(np.abs(d).sum())
    return total


def l1_trend_filter(
    data: np.ndarray,
    lambdas,
    tol: float = 1e-6,
    max_iter: int = 10000,
    rho: float = 1.0,
) -> np.ndarray:
    """Solve the composite L1 trend objective by operator splitting (ADMM).

    Minimizes sum((x - data)^2) + sum_i lambda_i * ||D_i x||_1 over the
    first, second and third difference operators, jointly over all columns
    of ``data``.  Iterates until both primal and dual residual max-norms
    fall below ``tol``.  The returned path never has a larger objective
    than the input.

    Raises:
        SolverDiverged: if the residuals stop decreasing for 500
            consecutive iterations before reaching the tolerance.
    """
    x_in = np.asarray(data, dtype=np.float64)
    squeeze = x_in.ndim == 1
    xd = x_in[:, None] if squeeze else x_in
    n = len(xd)
    lambdas = tuple(float(l) for l in lambdas)
    if len(lambdas) != 3:
        raise ValueError("lambdas must have three entries")
    if n < 4:
        raise InvalidParams("trend filtering needs at least 4 samples")

    ds = [_difference_matrix(n, order) for order in (1, 2, 3)]
    a = sparse.vstack(ds).tocsr()
    at = a.T.tocsr()
    m = (2.0 * sparse.eye(n) + rho * (at @ a)).tocsc()
    solver = splu(m)
    sizes = [d.shape[0] for d in ds]
    bounds = np.cumsum([0] + sizes)
    thresh = np.concatenate(
        [np.full(sz, lam / rho) for sz, lam in zip(sizes, lambdas)]
    )[:, None]

    x = xd.copy()
    z = a @ x
    u = np.zeros_like(z)
    best = math.inf
    stall = 0
    for _ in range(max_iter):
        x = solver.solve(2.0 * xd + rho * (at @ (z - u)))
        ax = a @ x
        z_old = z
        v = ax + u
        z = np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)
        u = u + ax - z
        primal = float(np.abs(ax - z).max(initial=0.0))
        dual = float(rho * np.abs(at @ (z - z_old)).max(initial=0.0))
        res = max(primal, dual)
        if res < tol:
            break
        if res < best - 1e-15:
            best = res
            stall = 0
        else:
            stall += 1
            if stall >= 500:
                raise SolverDiverged(
                    f"residual {res:.3e} not decreasing for 500 iterations"
                )
    else:
        raise SolverDiverged(f"no convergence within {max_iter} iterations")

    if trend_objective(x, xd, lambdas) >= trend_objective(xd, xd, lambdas):
        x = xd.copy()
    return x[:, 0] if squeeze else x


def stabilize(
    path,
    weights: SmoothingWeights = SmoothingWeights(),
    tol: float = 1e-6,
    max_iter: int = 10000,
) -> list[CameraParams]:
    """Stabilize a camera-parameter path (N >= 4 frames).

    Each parameter is divided by its entry of ``weights.param_scales``,
    the joint L1-trend objective is solved, and the result is scaled
    back.
    """
    arr = np.stack([p.as_array() for p in path])
    if len(arr) < 4:
        raise InvalidParams("stabilization needs at least 4 frames")
    scales = np.asarray(weights.param_scales, dtype=np.float64)
    smoothed = l1_trend_filter(
        arr / scales,
        (weights.lambda1, weights.lambda2, weights.lambda3),
        tol=tol,
        max_iter=max_iter,
    ) * scales
    return [CameraParams.from_array(row) for row in smoothed]


def camera_path_to_homographies(path, image_size: tuple[int, int]) -> np.ndarray:
    """Per-frame homographies (image -> model) from a camera path."""
    w, h = image_size
    rect = rect_quad(float(w), float(h))
    out = np.empty((len(path), 3, 3))
    for i, cam in enumerate(path):
        out[i] = estimate_dlt(rect, camera_to_quad(cam))
    return out
