"""Core domain types: images, label maps, tiles, grids, and stitching.

Shapes follow numpy convention (height, width) for arrays; public APIs that
take an image shape take it as (width, height), matching the on-disk header
order of every artifact format in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_CLASS_NAMES = ("Good", "Bad", "BGD")

PMF_ATOL = 1e-5


@dataclass(frozen=True)
class Tile:
    """A square window fully inside its source image."""

    x0: int
    y0: int
    size: int

    def bounds(self) -> tuple[int, int, int, int]:
        return self.x0, self.y0, self.x0 + self.size, self.y0 + self.size

    def slices(self) -> tuple[slice, slice]:
        """(row, col) slices addressing this tile in an (H, W, ...) array."""
        return (
            slice(self.y0, self.y0 + self.size),
            slice(self.x0, self.x0 + self.size),
        )

    def contained_in(self, width: int, height: int) -> bool:
        return (
            0 <= self.x0 <= width - self.size
            and 0 <= self.y0 <= height - self.size
        )


@dataclass
class LargeImage:
    """Single-channel image with intensities normalized to [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2:
            raise ValueError(f"image must be 2-D, got shape {self.pixels.shape}")
        if self.pixels.size == 0:
            raise ValueError("image must be non-empty")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"intensities must lie in [0, 1], got [{lo}, {hi}]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1

    @property
    def shape_wh(self) -> tuple[int, int]:
        return self.width, self.height


@dataclass
class LabelMap:
    """Per-pixel class indices in {0 .. len(class_names)-1}."""

    labels: np.ndarray
    class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise ValueError(f"labels must be 2-D, got shape {self.labels.shape}")
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise ValueError(f"labels must be integral, got dtype {self.labels.dtype}")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.class_names)
        ):
            raise ValueError(
                f"labels must lie in [0, {len(self.class_names) - 1}]"
            )

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class TileGrid:
    """Row-major tile cover of a (width, height) image."""

    tiles: tuple[Tile, ...]
    stride: int
    source_shape: tuple[int, int]

    def __len__(self) -> int:
        return len(self.tiles)

    def __iter__(self):
        return iter(self.tiles)


@dataclass
class ProbabilityMap:
    """Per-pixel class distributions plus how many tiles contributed to each pixel."""

    probs: np.ndarray  # (H, W, C), each pixel a pmf
    coverage: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs)
        if self.probs.ndim != 3:
            raise ValueError(f"probs must be (H, W, C), got shape {self.probs.shape}")
        if self.coverage is None:
            self.coverage = np.ones(self.probs.shape[:2], dtype=np.int32)
        else:
            self.coverage = np.asarray(self.coverage)
        if self.coverage.shape != self.probs.shape[:2]:
            raise ValueError("coverage shape must match the probability grid")
        if self.coverage.min() < 1:
            raise ValueError("every pixel needs coverage >= 1")
        _check_pmf(self.probs)

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[2]


def _check_pmf(probs: np.ndarray) -> None:
    if probs.size == 0:
        raise ValueError("empty probability array")
    if float(probs.min()) < 0.0:
        raise ValueError("probabilities must be non-negative")
    sums = probs.sum(axis=-1, dtype=np.float64)
    err = float(np.abs(sums - 1.0).max())
    if err > PMF_ATOL:
        raise ValueError(f"per-pixel vectors must sum to 1 (max deviation {err:.3g})")


def _axis_positions(dim: int, tile_size: int, stride: int) -> list[int]:
    last = dim - tile_size
    positions = list(range(0, last + 1, stride))
    if positions[-1] != last:
        positions.append(last)  # clamp the final tile flush to the edge
    return positions


def build_grid(shape_wh: tuple[int, int], tile_size: int, stride: int) -> TileGrid:
    """Row-major sliding-window grid over a (width, height) image.

    Window origins advance by `stride`; when (dim - tile_size) is not a
    multiple of the stride the last tile of the row/column is clamped so it
    ends exactly at the image edge. Every pixel is covered at least once.
    """
    width, height = shape_wh
    if tile_size < 1:
        raise ValueError(f"tile size must be >= 1, got {tile_size}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if stride > tile_size:
        # origins advance by the stride, so anything past the tile size
        # would leave uncovered gaps between consecutive tiles
        raise ValueError(f"stride {stride} exceeds tile size {tile_size}")
    if tile_size > width or tile_size > height:
        raise ValueError(
            f"tile size {tile_size} exceeds image dimensions {width}x{height}"
        )
    xs = _axis_positions(width, tile_size, stride)
    ys = _axis_positions(height, tile_size, stride)
    tiles = tuple(Tile(x, y, tile_size) for y in ys for x in xs)
    return TileGrid(tiles=tiles, stride=stride, source_shape=(width, height))


def extract(image: LargeImage, tile: Tile) -> np.ndarray:
    """Copy of the tile's pixels from the source image."""
    if not tile.contained_in(image.width, image.height):
        raise ValueError(f"tile {tile} is not inside a {image.width}x{image.height} image")
    return image.pixels[tile.slices()].copy()


def extract_labels(labels: LabelMap, tile: Tile) -> np.ndarray:
    if not tile.contained_in(labels.width, labels.height):
        raise ValueError(f"tile {tile} is not inside a {labels.width}x{labels.height} label map")
    return labels.labels[tile.slices()].copy()


def stitch(
    per_tile_probs: list[tuple[Tile, np.ndarray]],
    shape_wh: tuple[int, int],
) -> ProbabilityMap:
    """Average overlapping per-tile class distributions into one map.

    Accumulates sequentially in tile order in float64 and divides by the
    per-pixel coverage count, then finalizes to float32 (the on-disk dtype).
    Raises if any pixel is left uncovered.
    """
    width, height = shape_wh
    if not per_tile_probs:
        raise ValueError("nothing to stitch")
    num_classes = per_tile_probs[0][1].shape[-1]
    acc = np.zeros((height, width, num_classes), dtype=np.float64)
    coverage = np.zeros((height, width), dtype=np.int32)
    for tile, probs in per_tile_probs:
        if not tile.contained_in(width, height):
            raise ValueError(f"tile {tile} is not inside {width}x{height}")
        probs = np.asarray(probs)
        if probs.shape != (tile.size, tile.size, num_classes):
            raise ValueError(
                f"tile probabilities must be ({tile.size}, {tile.size}, {num_classes}),"
                f" got {probs.shape}"
            )
        _check_pmf(probs)
        rows, cols = tile.slices()
        acc[rows, cols] += probs
        coverage[rows, cols] += 1
    if coverage.min() < 1:
        n = int((coverage == 0).sum())
        raise ValueError(f"{n} pixels have no covering tile; the grid must cover the image")
    mean = acc / coverage[..., None]
    return ProbabilityMap(probs=mean.astype(np.float32), coverage=coverage)


def argmax_labels(
    pmap: ProbabilityMap, class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES
) -> LabelMap:
    """Most probable class per pixel; ties go to the lowest class index."""
    if pmap.num_classes != len(class_names):
        raise ValueError(
            f"map has {pmap.num_classes} classes but {len(class_names)} names given"
        )
    labels = np.argmax(pmap.probs, axis=-1).astype(np.uint8)
    return LabelMap(labels=labels, class_names=class_names)
