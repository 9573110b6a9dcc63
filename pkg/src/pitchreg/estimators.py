"""Scikit-learn style wrappers around the registration pipeline.

``FieldRegistrar`` is fitted on seed annotations (or a prebuilt
dictionary) and predicts image-to-model homographies for query edge maps;
``CameraPathSmoother`` turns per-frame candidate sets into a temporally
smoothed, stabilized homography sequence.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .dictionary import Dictionary, PtzGrid, build_dictionary
from .errors import EmptyCandidates
from .features import HogConfig
from .geometry import polygon_iou, rect_quad, warp_quad
from .matcher import CandidateSet, register_frame
from .pitch import PitchModel, standard_pitch
from .temporal import (
    CameraParams,
    SmoothingWeights,
    camera_path_to_homographies,
    mrf_smooth,
    stabilize,
)


class FieldRegistrar(BaseEstimator):
    """Nearest-neighbour registration of edge maps onto the pitch model.

    Parameters
    ----------
    metric : {"hog", "chamfer"}
        Distance used for the dictionary scan.
    k : int
        Number of candidates retrieved per query.
    eps : float
        Approximate-NN band for the chamfer metric (0 disables it).
    grid : PtzGrid or None
        Pan/tilt/zoom steps; the package default when None.
    model : PitchModel or None
        Field geometry; a standard 105x68 pitch when None.
    raster_size : (int, int)
        Dictionary raster (width, height).
    hog_config : HogConfig or None
        Descriptor configuration recorded in the dictionary.
    n_jobs : int or None
        Parallelism of the dictionary build.
    """

    def __init__(
        self,
        metric: str = "hog",
        k: int = 5,
        eps: float = 0.0,
        grid: PtzGrid | None = None,
        model: PitchModel | None = None,
        raster_size: tuple[int, int] = (256, 144),
        hog_config: HogConfig | None = None,
        n_jobs: int | None = None,
    ):
        self.metric = metric
        self.k = k
        self.eps = eps
        self.grid = grid
        self.model = model
        self.raster_size = raster_size
        self.hog_config = hog_config
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        """Build (or adopt) the search dictionary.

        X is either a list of SeedAnnotation or an existing Dictionary.
        """
        if isinstance(X, Dictionary):
            self.dictionary_ = X
            return self
        self.dictionary_ = build_dictionary(
            X,
            self.grid if self.grid is not None else PtzGrid.default(),
            self.model if self.model is not None else standard_pitch(),
            raster_size=self.raster_size,
            hog_config=self.hog_config if self.hog_config is not None else HogConfig(),
            n_jobs=self.n_jobs,
        )
        return self

    def _fitted_dictionary(self) -> Dictionary:
        if not hasattr(self, "dictionary_"):
            raise NotFittedError("FieldRegistrar is not fitted; call fit first")
        return self.dictionary_

    def kneighbors(self, X, n_neighbors: int | None = None) -> list[CandidateSet]:
        """Candidate sets for each query edge map in X."""
        dct = self._fitted_dictionary()
        k = self.k if n_neighbors is None else n_neighbors
        return [
            register_frame(
                edges, dct, metric=self.metric, k=k, eps=self.eps, query_id=str(i)
            )
            for i, edges in enumerate(X)
        ]

    def predict(self, X) -> np.ndarray:
        """Rank-1 homography for each query edge map, as (n, 3, 3)."""
        dct = self._fitted_dictionary()
        sets = self.kneighbors(X, n_neighbors=1)
        return np.stack([dct.homographies[cs[0].entry_index] for cs in sets])

    def score(self, X, y) -> float:
        """Mean boundary-quad IOU of predictions against truth homographies."""
        dct = self._fitted_dictionary()
        w, h = dct.raster_size
        rect = rect_quad(float(w), float(h))
        preds = self.predict(X)
        ious = [
            polygon_iou(warp_quad(est, rect), warp_quad(np.asarray(gt), rect))
            for est, gt in zip(preds, y)
        ]
        return float(np.mean(ious))


class CameraPathSmoother(BaseEstimator, TransformerMixin):
    """MRF candidate selection plus convex stabilization over a video.

    transform() maps a list of per-frame CandidateSets to the stabilized
    (n, 3, 3) homography sequence; smooth_path() additionally exposes the
    selected states and raw/stabilized camera parameters.
    """

    def __init__(
        self,
        dictionary: Dictionary | None = None,
        w_smooth: float = 1.0,
        lambda1: float = 0.1,
        lambda2: float = 1.0,
        lambda3: float = 10.0,
        param_scales: tuple[float, ...] = (10.0, 10.0, 0.1, 0.1, 10.0, 10.0),
        stabilize_tol: float = 1e-6,
        max_iter: int = 10000,
    ):
        self.dictionary = dictionary
        self.w_smooth = w_smooth
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lambda3 = lambda3
        self.param_scales = param_scales
        self.stabilize_tol = stabilize_tol
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        return self

    def _weights(self) -> SmoothingWeights:
        return SmoothingWeights(
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            lambda3=self.lambda3,
            param_scales=tuple(self.param_scales),
        )

    def smooth_path(self, X):
        """Run MRF selection and stabilization over candidate sets.

        Returns a dict with ``states`` (per-frame candidate ranks),
        ``raw_params`` and ``stabilized_params`` (lists of CameraParams,
        theta unwrapped along the sequence) and ``homographies``.
        """
        if self.dictionary is None:
            raise ValueError("CameraPathSmoother needs a dictionary")
        if len(X) == 0:
            raise EmptyCandidates("no frames")
        dct = self.dictionary
        path = mrf_smooth(X, dct.homographies, dct.h_scales, w_smooth=self.w_smooth)
        entry_idx = [cs[s].entry_index for cs, s in zip(X, path.states)]
        raw = np.stack([dct.cams[i] for i in entry_idx])
        raw[:, 2] = np.unwrap(raw[:, 2])
        raw_params = [CameraParams.from_array(row) for row in raw]
        if len(raw_params) >= 4:
            stabilized = stabilize(
                raw_params,
                self._weights(),
                tol=self.stabilize_tol,
                max_iter=self.max_iter,
            )
        else:
            stabilized = list(raw_params)
        homographies = camera_path_to_homographies(stabilized, dct.raster_size)
        return {
            "states": path,
            "raw_params": raw_params,
            "stabilized_params": stabilized,
            "homographies": homographies,
        }

    def transform(self, X) -> np.ndarray:
        return self.smooth_path(X)["homographies"]
