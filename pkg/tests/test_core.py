import numpy as np
import pytest

from useg.core import (
    LabelMap,
    LargeImage,
    ProbabilityMap,
    Tile,
    argmax_labels,
    build_grid,
    extract,
    extract_labels,
    stitch,
)


def random_pmf(rng, shape, classes):
    raw = rng.random(shape + (classes,)) + 1e-3
    return raw / raw.sum(axis=-1, keepdims=True)


class TestBuildGrid:
    def test_full_scale_count(self):
        # (dim - d)/s + 1 positions per axis when divisible: 145 * 105
        grid = build_grid((1600, 1200), 160, 10)
        assert len(grid) == 145 * 105 == 15225

    def test_single_tile_image(self):
        grid = build_grid((160, 160), 160, 10)
        assert grid.tiles == (Tile(0, 0, 160),)

    def test_edge_clamp(self):
        grid = build_grid((165, 160), 160, 10)
        assert [(t.x0, t.y0) for t in grid.tiles] == [(0, 0), (5, 0)]

    def test_row_major_order(self):
        grid = build_grid((3, 3), 1, 1)
        assert [(t.x0, t.y0) for t in grid.tiles] == [
            (0, 0), (1, 0), (2, 0),
            (0, 1), (1, 1), (2, 1),
            (0, 2), (1, 2), (2, 2),
        ]

    def test_rejects_tile_larger_than_image(self):
        with pytest.raises(ValueError):
            build_grid((100, 200), 160, 10)
        with pytest.raises(ValueError):
            build_grid((200, 100), 160, 10)

    def test_rejects_nonpositive_stride(self):
        with pytest.raises(ValueError):
            build_grid((100, 100), 10, 0)

    def test_rejects_stride_beyond_tile_size(self):
        # such a grid would leave gaps between consecutive tiles
        with pytest.raises(ValueError):
            build_grid((100, 100), 10, 11)

    def test_coverage_exhaustive_small_shapes(self):
        # every pixel covered at least once, for a sweep of awkward shapes
        for w in range(4, 12):
            for h in range(4, 12):
                for d in range(2, min(w, h) + 1):
                    for s in range(1, d + 1):
                        grid = build_grid((w, h), d, s)
                        cover = np.zeros((h, w), dtype=int)
                        for t in grid:
                            cover[t.slices()] += 1
                        assert cover.min() >= 1, (w, h, d, s)


class TestExtract:
    def test_matches_hand_slice(self):
        rng = np.random.default_rng(0)
        img = LargeImage(pixels=rng.random((20, 30)))
        tile = Tile(4, 7, 8)
        np.testing.assert_array_equal(extract(img, tile), img.pixels[7:15, 4:12])

    def test_whole_image_tile(self):
        rng = np.random.default_rng(1)
        img = LargeImage(pixels=rng.random((16, 16)))
        np.testing.assert_array_equal(extract(img, Tile(0, 0, 16)), img.pixels)

    def test_out_of_bounds_rejected(self):
        img = LargeImage(pixels=np.zeros((16, 16)))
        with pytest.raises(ValueError):
            extract(img, Tile(9, 0, 8))
        with pytest.raises(ValueError):
            extract(img, Tile(-1, 0, 8))

    def test_extract_labels_matches(self):
        rng = np.random.default_rng(2)
        lm = LabelMap(labels=rng.integers(0, 3, size=(12, 12)))
        np.testing.assert_array_equal(
            extract_labels(lm, Tile(2, 3, 5)), lm.labels[3:8, 2:7]
        )

    def test_stitch_of_extract_roundtrip(self):
        # stitching a full non-overlapping grid of constant-pmf tiles
        # reconstructs the field exactly
        rng = np.random.default_rng(3)
        field = random_pmf(rng, (12, 16), 3).astype(np.float32)
        grid = build_grid((16, 12), 4, 4)
        pieces = [(t, field[t.slices()]) for t in grid]
        out = stitch(pieces, (16, 12))
        np.testing.assert_array_equal(out.probs, field)
        assert out.coverage.min() == out.coverage.max() == 1


class TestStitch:
    def test_single_tile_identity(self):
        rng = np.random.default_rng(4)
        probs = random_pmf(rng, (8, 8), 3).astype(np.float32)
        out = stitch([(Tile(0, 0, 8), probs)], (8, 8))
        np.testing.assert_allclose(out.probs, probs, atol=1e-7)

    def test_two_overlapping_tiles_average(self):
        a = np.zeros((4, 4, 3))
        a[..., 0] = 1.0
        b = np.zeros((4, 4, 3))
        b[..., 1] = 1.0
        out = stitch([(Tile(0, 0, 4), a), (Tile(0, 0, 4), b)], (4, 4))
        np.testing.assert_allclose(out.probs, np.full((4, 4, 3), [0.5, 0.5, 0.0]))
        assert (out.coverage == 2).all()

    def test_matches_bruteforce_accumulator(self):
        rng = np.random.default_rng(5)
        tiles = [Tile(0, 0, 6), Tile(4, 0, 6), Tile(0, 2, 6), Tile(4, 2, 6), Tile(2, 1, 6)]
        pieces = [(t, random_pmf(rng, (6, 6), 3)) for t in tiles]
        w, h = 10, 8
        acc = np.zeros((h, w, 3))
        cov = np.zeros((h, w), dtype=int)
        for t, p in pieces:
            for r in range(t.size):
                for c in range(t.size):
                    acc[t.y0 + r, t.x0 + c] += p[r, c]
                    cov[t.y0 + r, t.x0 + c] += 1
        assert cov.min() >= 1
        expected = (acc / cov[..., None]).astype(np.float32)
        out = stitch(pieces, (w, h))
        np.testing.assert_array_equal(out.probs, expected)
        np.testing.assert_array_equal(out.coverage, cov)

    def test_pmf_conservation(self):
        rng = np.random.default_rng(6)
        grid = build_grid((20, 14), 6, 4)
        pieces = [(t, random_pmf(rng, (6, 6), 4)) for t in grid]
        out = stitch(pieces, (20, 14))
        sums = out.probs.sum(axis=-1, dtype=np.float64)
        assert np.abs(sums - 1.0).max() <= 1e-6

    def test_uncovered_pixel_rejected(self):
        probs = np.full((4, 4, 2), 0.5)
        with pytest.raises(ValueError, match="cover"):
            stitch([(Tile(0, 0, 4), probs)], (8, 8))

    def test_invalid_pmf_rejected(self):
        bad = np.full((4, 4, 2), 0.4)  # sums to 0.8
        with pytest.raises(ValueError):
            stitch([(Tile(0, 0, 4), bad)], (4, 4))


class TestArgmaxLabels:
    def test_plain_max(self):
        pmap = ProbabilityMap(probs=np.array([[[0.2, 0.7, 0.1]]]))
        assert argmax_labels(pmap).labels[0, 0] == 1

    def test_tie_goes_to_lowest_index(self):
        pmap = ProbabilityMap(probs=np.array([[[0.4, 0.4, 0.2]]]))
        assert argmax_labels(pmap).labels[0, 0] == 0

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(7)
        probs = random_pmf(rng, (9, 11), 3)
        pmap = ProbabilityMap(probs=probs)
        got = argmax_labels(pmap).labels
        for r in range(9):
            for c in range(11):
                best, best_p = 0, probs[r, c, 0]
                for k in range(1, 3):
                    if probs[r, c, k] > best_p:
                        best, best_p = k, probs[r, c, k]
                assert got[r, c] == best

    def test_scale_invariance_of_argmax(self):
        # argmax decisions are unchanged by a positive per-pixel rescale
        rng = np.random.default_rng(8)
        probs = random_pmf(rng, (6, 6), 3)
        base = np.argmax(probs, axis=-1)
        scaled = np.argmax(probs * 3.7, axis=-1)
        np.testing.assert_array_equal(base, scaled)


class TestDomainTypes:
    def test_image_range_validated(self):
        with pytest.raises(ValueError):
            LargeImage(pixels=np.array([[0.0, 1.2]]))
        with pytest.raises(ValueError):
            LargeImage(pixels=np.array([[-0.1, 0.5]]))

    def test_label_range_validated(self):
        with pytest.raises(ValueError):
            LabelMap(labels=np.array([[0, 3]]), class_names=("a", "b", "c"))

    def test_probability_map_validates_coverage(self):
        probs = np.full((2, 2, 2), 0.5)
        with pytest.raises(ValueError):
            ProbabilityMap(probs=probs, coverage=np.zeros((2, 2), dtype=int))

    def test_tile_bounds_helpers(self):
        t = Tile(2, 3, 4)
        assert t.bounds() == (2, 3, 6, 7)
        assert t.contained_in(6, 7)
        assert not t.contained_in(5, 7)
