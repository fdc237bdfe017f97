"""Predictive-entropy maps, normalization, thresholding, and tile aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ProbabilityMap, Tile

NORMALIZE_MODES = ("analytic", "empirical")


@dataclass
class UncertaintyMap:
    """Per-pixel normalized entropy in [0, 1], stored as float32 (the disk dtype)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        lo, hi = float(self.values.min()), float(self.values.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"normalized entropy must lie in [0, 1], got [{lo}, {hi}]")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class CertaintyMask:
    """Boolean per-pixel map: True where the prediction counts as certain."""

    certain: np.ndarray

    def __post_init__(self) -> None:
        self.certain = np.asarray(self.certain)
        if self.certain.ndim != 2 or self.certain.dtype != np.bool_:
            raise ValueError("mask must be a 2-D boolean array")

    @property
    def height(self) -> int:
        return self.certain.shape[0]

    @property
    def width(self) -> int:
        return self.certain.shape[1]


def entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy (natural log) along the last axis, with 0*log(0) = 0."""
    p = np.asarray(probs, dtype=np.float64)
    if p.size and float(p.min()) < 0.0:
        raise ValueError("probabilities must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


def entropy_map(pmap: ProbabilityMap) -> np.ndarray:
    """Raw per-pixel predictive entropy, in [0, ln C], as float64."""
    return entropy(pmap.probs)


def normalize_entropy(
    raw: np.ndarray, num_classes: int, mode: str = "analytic"
) -> UncertaintyMap:
    """Rescale raw entropies to [0, 1].

    analytic:  divide by ln(num_classes), the entropy of the uniform pmf.
    empirical: (H - min) / (max - min) over the given array; a constant
               array maps to all zeros.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size and float(raw.min()) < -1e-12:
        raise ValueError("raw entropies must be non-negative")
    if mode == "analytic":
        if num_classes < 2:
            raise ValueError("analytic normalization needs at least 2 classes")
        values = raw / np.log(num_classes)
    elif mode == "empirical":
        lo, hi = float(raw.min()), float(raw.max())
        if hi - lo <= 0.0:
            values = np.zeros_like(raw)
        else:
            values = (raw - lo) / (hi - lo)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}; expected one of {NORMALIZE_MODES}")
    return UncertaintyMap(values=np.clip(values, 0.0, 1.0).astype(np.float32))


def uncertainty_from_probabilities(
    pmap: ProbabilityMap, mode: str = "analytic"
) -> UncertaintyMap:
    return normalize_entropy(entropy_map(pmap), pmap.num_classes, mode=mode)


def threshold_uncertainty(umap: UncertaintyMap, threshold: float) -> CertaintyMask:
    """Certain wherever the normalized entropy is <= threshold (ties are certain)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return CertaintyMask(certain=umap.values <= np.float64(threshold))


def tile_uncertainty(umap: UncertaintyMap, tile: Tile) -> float:
    """Mean normalized entropy inside the tile, in [0, 1]."""
    if not tile.contained_in(umap.width, umap.height):
        raise ValueError(f"tile {tile} is not inside a {umap.width}x{umap.height} map")
    return float(umap.values[tile.slices()].astype(np.float64).mean())
