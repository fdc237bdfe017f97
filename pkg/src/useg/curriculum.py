"""Uncertainty-driven resampling: the Gaussian step rule and the plan scan.

High tile uncertainty shrinks the scan step, so uncertain areas of the image
are covered by more (more densely overlapping) training tiles. The stage
loop that retrains on those plans lives in stages.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Tile
from .uncertainty import UncertaintyMap, tile_uncertainty


@dataclass(frozen=True)
class CurriculumConfig:
    tile_size: int = 160
    sigma: float = 0.4
    max_stages: int = 4  # total stages including the initial training stage
    min_step: int = 1
    stop_epsilon: float = 0.001  # on validation ua improvement

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.min_step < 1:
            raise ValueError(f"min_step must be >= 1, got {self.min_step}")
        if self.max_stages < 1:
            raise ValueError(f"max_stages must be >= 1, got {self.max_stages}")
        if self.tile_size < 1:
            raise ValueError(f"tile_size must be >= 1, got {self.tile_size}")


@dataclass(frozen=True)
class CurriculumPlan:
    """Resampled tile positions for one image and one stage, in scan order."""

    tiles: tuple[Tile, ...]
    stage_index: int
    source_image_id: str

    def __len__(self) -> int:
        return len(self.tiles)

    def __iter__(self):
        return iter(self.tiles)


def step_size(mean_uncertainty: float, tile_size: int, sigma: float, min_step: int = 1) -> int:
    """Scan advance in pixels: tile_size * exp(-u^2 / (2 sigma^2)).

    Rounded half-up to an integer and clamped to >= min_step so the scan
    always advances. Non-increasing in the uncertainty; at u = 0 the step
    equals the tile size (non-overlapping coverage).
    """
    if not 0.0 <= mean_uncertainty <= 1.0:
        raise ValueError(f"mean uncertainty must lie in [0, 1], got {mean_uncertainty}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    raw = tile_size * math.exp(-(mean_uncertainty**2) / (2.0 * sigma**2))
    return max(min_step, int(math.floor(raw + 0.5)))


def build_plan(
    umap: UncertaintyMap,
    cfg: CurriculumConfig,
    stage_index: int = 2,
    source_image_id: str = "",
) -> CurriculumPlan:
    """Scan the map row by row, advancing by the step rule.

    Horizontal advance comes from the current tile's mean uncertainty and is
    clamped so the last tile of a row sits flush at the right edge; vertical
    advance comes from the mean uncertainty of the just-completed row, with
    the bottom row clamped flush likewise. Every emitted tile lies inside
    the image, and the whole image stays covered because no step exceeds
    the tile size.
    """
    d = cfg.tile_size
    if umap.width < d or umap.height < d:
        raise ValueError(
            f"map {umap.width}x{umap.height} is smaller than the tile size {d}"
        )
    last_x = umap.width - d
    last_y = umap.height - d
    tiles: list[Tile] = []
    y = 0
    while True:
        row_uncertainty: list[float] = []
        x = 0
        while True:
            tile = Tile(x, y, d)
            u = tile_uncertainty(umap, tile)
            tiles.append(tile)
            row_uncertainty.append(u)
            if x == last_x:
                break
            x = min(x + step_size(u, d, cfg.sigma, cfg.min_step), last_x)
        if y == last_y:
            break
        row_mean = float(np.mean(row_uncertainty))
        y = min(y + step_size(row_mean, d, cfg.sigma, cfg.min_step), last_y)
    return CurriculumPlan(
        tiles=tuple(tiles), stage_index=stage_index, source_image_id=source_image_id
    )
