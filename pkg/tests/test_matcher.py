import time

import numpy as np
import pytest

from pitchreg.dictionary import Dictionary
from pitchreg.errors import EmptyDictionary, EmptyEdgeMap
from pitchreg.features import HogConfig, chamfer_score, distance_transform, hog
from pitchreg.matcher import (
    _DIRECT_SCAN_LIMIT,
    knn_chamfer,
    knn_hog,
    register_frame,
)


def brute_force_chamfer_ranking(query, dct):
    t = distance_transform(query)
    scores = [chamfer_score(t, dct.edges(j)) for j in range(len(dct))]
    return sorted(range(len(dct)), key=lambda j: (scores[j], j)), scores


def brute_force_hog_ranking(query, dct):
    q = hog(query, dct.hog_config).astype(np.float64)
    dists = [
        float(np.linalg.norm(dct.hog_matrix[j].astype(np.float64) - q))
        for j in range(len(dct))
    ]
    return sorted(range(len(dct)), key=lambda j: (dists[j], j)), dists


class TestChamferKnn:
    def test_self_retrieval(self, small_dictionary):
        j = min(17, len(small_dictionary) - 1)
        cs = knn_chamfer(small_dictionary.edges(j), small_dictionary, k=3)
        assert cs[0].entry_index == j
        assert cs[0].distance == 0.0

    def test_k_larger_than_dictionary(self, small_dictionary):
        cs = knn_chamfer(small_dictionary.edges(0), small_dictionary, k=10_000)
        assert len(cs) == len(small_dictionary)
        d = [c.distance for c in cs.candidates]
        assert all(b >= a for a, b in zip(d, d[1:]))

    def test_matches_exhaustive_oracle(self, small_dictionary):
        rng = np.random.default_rng(61)
        for _ in range(8):
            query = (rng.random((144, 256)) < 0.01).astype(np.uint8)
            cs = knn_chamfer(query, small_dictionary, k=12)
            ranking, scores = brute_force_chamfer_ranking(query, small_dictionary)
            assert [c.entry_index for c in cs.candidates] == ranking[:12]
            for c in cs.candidates:
                assert abs(c.distance - scores[c.entry_index]) < 1e-9

    def test_eps_band(self, small_dictionary):
        query = small_dictionary.edges(3)
        full = knn_chamfer(query, small_dictionary, k=len(small_dictionary))
        banded = knn_chamfer(query, small_dictionary, k=len(small_dictionary), eps=0.5)
        best = full[0].distance
        expected = [c for c in full.candidates if c.distance <= 1.5 * best]
        assert list(banded.candidates) == expected

    def test_empty_query(self, small_dictionary):
        with pytest.raises(EmptyEdgeMap):
            knn_chamfer(np.zeros((144, 256), np.uint8), small_dictionary)


class TestHogKnn:
    def test_self_retrieval_distance_exactly_zero(self, small_dictionary):
        j = min(29, len(small_dictionary) - 1)
        cs = knn_hog(small_dictionary.edges(j), small_dictionary, k=3)
        assert cs[0].entry_index == j
        assert cs[0].distance == 0.0

    def test_matches_naive_scan(self, small_dictionary):
        rng = np.random.default_rng(67)
        for _ in range(5):
            query = (rng.random((144, 256)) < 0.01).astype(np.uint8)
            cs = knn_hog(query, small_dictionary, k=9)
            ranking, dists = brute_force_hog_ranking(query, small_dictionary)
            assert [c.entry_index for c in cs.candidates] == ranking[:9]
            for c in cs.candidates:
                assert abs(c.distance - dists[c.entry_index]) < 1e-12

    def test_repeat_calls_identical(self, small_dictionary):
        query = small_dictionary.edges(1)
        assert knn_hog(query, small_dictionary, k=5) == knn_hog(
            query, small_dictionary, k=5
        )

    def test_preselect_path_equals_naive_scan(self, small_dictionary):
        # Synthetic dictionary above the direct-scan limit exercises the
        # float32 preselect + exact float64 rescore path.
        rng = np.random.default_rng(71)
        n = _DIRECT_SCAN_LIMIT + 400
        base = small_dictionary
        reps = -(-n // len(base))
        hog_matrix = np.vstack([base.hog_matrix] * reps)[:n]
        hog_matrix = hog_matrix + rng.normal(0, 1e-4, hog_matrix.shape).astype(
            np.float32
        )
        packed = np.vstack([base.packed_edges] * reps)[:n]
        homos = np.vstack([base.homographies] * reps)[:n]
        cams = np.vstack([base.cams] * reps)[:n]
        big = Dictionary(
            base.raster_size, base.hog_config, homos, cams, hog_matrix, packed
        )
        for _ in range(3):
            query = (rng.random((144, 256)) < 0.01).astype(np.uint8)
            cs = knn_hog(query, big, k=7)
            ranking, dists = brute_force_hog_ranking(query, big)
            assert [c.entry_index for c in cs.candidates] == ranking[:7]
            for c in cs.candidates:
                assert abs(c.distance - dists[c.entry_index]) < 1e-12

    def test_preselect_self_retrieval_exact(self, small_dictionary):
        base = small_dictionary
        n = _DIRECT_SCAN_LIMIT + 10
        reps = -(-n // len(base))
        big = Dictionary(
            base.raster_size,
            base.hog_config,
            np.vstack([base.homographies] * reps)[:n],
            np.vstack([base.cams] * reps)[:n],
            np.vstack([base.hog_matrix] * reps)[:n],
            np.vstack([base.packed_edges] * reps)[:n],
        )
        cs = knn_hog(big.edges(2), big, k=1)
        # Duplicated entries tie at exactly zero; the lowest index wins.
        assert cs[0].entry_index == 2
        assert cs[0].distance == 0.0


class TestRegisterFrame:
    def test_dispatch_and_query_id(self, small_dictionary):
        q = small_dictionary.edges(0)
        a = register_frame(q, small_dictionary, metric="chamfer", query_id="f0")
        b = register_frame(q, small_dictionary, metric="hog", query_id="f0")
        assert a.query_id == b.query_id == "f0"
        assert a[0].metric == "chamfer"
        assert b[0].metric == "hog"
        assert a[0].entry_index == b[0].entry_index == 0

    def test_bad_metric(self, small_dictionary):
        with pytest.raises(ValueError):
            register_frame(small_dictionary.edges(0), small_dictionary, metric="cnn")

    def test_empty_query(self, small_dictionary):
        with pytest.raises(EmptyEdgeMap):
            register_frame(np.zeros((144, 256), np.uint8), small_dictionary)

    def test_empty_dictionary(self, small_dictionary):
        empty = Dictionary(
            small_dictionary.raster_size,
            small_dictionary.hog_config,
            np.empty((0, 3, 3)),
            np.empty((0, 6)),
            np.empty((0, small_dictionary.hog_matrix.shape[1]), dtype=np.float32),
            np.empty((0, small_dictionary.packed_edges.shape[1]), dtype=np.uint8),
            h_scales=np.ones(8),
        )
        with pytest.raises(EmptyDictionary):
            register_frame(small_dictionary.edges(0), empty)


def test_chamfer_throughput_scales_linearly():
    # Synthetic index tables isolate the per-entry scan cost.  The 1e3
    # working set is cache-resident and thus faster per entry; linear
    # scaling within +-20% is asserted between the DRAM-resident sizes,
    # and the small size must never be slower than that bound.
    rng = np.random.default_rng(73)
    w, h = 256, 144
    t = rng.random(h * w)
    per_entry = {}
    for n in (1_000, 10_000, 100_000):
        counts = rng.integers(800, 2200, size=n)
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
        indices = rng.integers(0, h * w, size=int(counts.sum()))
        buf = np.empty(len(indices))
        best = np.inf
        for _ in range(5):
            t0 = time.perf_counter()
            np.take(t, indices, out=buf)
            sums = np.add.reduceat(buf, offsets)
            _ = sums / counts
            best = min(best, time.perf_counter() - t0)
        per_entry[n] = best / n
    assert 0.8 * per_entry[100_000] <= per_entry[10_000] <= 1.2 * per_entry[100_000], (
        per_entry
    )
    assert per_entry[1_000] <= 1.2 * per_entry[100_000], per_entry
