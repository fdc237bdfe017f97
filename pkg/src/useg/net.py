"""Encoder-decoder segmentation network with seeded Monte Carlo dropout.

Dropout is never driven by torch's global RNG: every forward pass that wants
stochastic masks receives an explicit torch.Generator, and passing None runs
the network deterministically. That makes every prediction a pure function
of (weights, input, seed), which the whole pipeline's reproducibility
contract rests on.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import io, seeds
from .core import LargeImage, ProbabilityMap, TileGrid, extract, stitch


@dataclass(frozen=True)
class NetConfig:
    tile_size: int = 160
    num_classes: int = 3
    depth: int = 4
    base_channels: int = 16
    dropout_rate: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.dropout_rate < 1.0:
            raise ValueError(f"dropout rate must lie in (0, 1), got {self.dropout_rate}")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        if self.base_channels < 1:
            raise ValueError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.tile_size % (1 << self.depth) != 0:
            raise ValueError(
                f"tile size {self.tile_size} must be divisible by 2^depth = {1 << self.depth}"
            )


def _dropout(x: torch.Tensor, rate: float, gen: torch.Generator | None) -> torch.Tensor:
    """Inverted dropout with masks drawn from the given generator; identity if None."""
    if gen is None:
        return x
    keep = (torch.rand(x.shape, generator=gen, dtype=x.dtype) >= rate).to(x.dtype)
    return x * keep / (1.0 - rate)


class _ConvBlock(nn.Module):
    """Two 3x3 conv+relu layers followed by dropout."""

    def __init__(self, cin: int, cout: int, dropout_rate: float):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.dropout_rate = dropout_rate

    def forward(self, x: torch.Tensor, gen: torch.Generator | None) -> torch.Tensor:
        x = torch.relu(self.conv1(x))
        x = torch.relu(self.conv2(x))
        return _dropout(x, self.dropout_rate, gen)


class BayesianUNet(nn.Module):
    """U-shaped net: `depth` encoder levels, a bottleneck, mirrored decoder
    with skip connections, softmax over classes at the output."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        widths = [cfg.base_channels * (1 << i) for i in range(cfg.depth)]
        self.encoder = nn.ModuleList()
        cin = 1
        for w in widths:
            self.encoder.append(_ConvBlock(cin, w, cfg.dropout_rate))
            cin = w
        self.bottleneck = _ConvBlock(cin, cin * 2, cfg.dropout_rate)
        cur = cin * 2
        self.upsamplers = nn.ModuleList()
        self.decoder = nn.ModuleList()
        for w in reversed(widths):
            self.upsamplers.append(nn.ConvTranspose2d(cur, w, 2, stride=2))
            self.decoder.append(_ConvBlock(2 * w, w, cfg.dropout_rate))
            cur = w
        self.head = nn.Conv2d(cur, cfg.num_classes, 1)

    def forward(self, x: torch.Tensor, gen: torch.Generator | None = None) -> torch.Tensor:
        skips = []
        for block in self.encoder:
            x = block(x, gen)
            skips.append(x)
            x = torch.max_pool2d(x, 2)
        x = self.bottleneck(x, gen)
        for up, block, skip in zip(self.upsamplers, self.decoder, reversed(skips)):
            x = up(x)
            x = block(torch.cat([skip, x], dim=1), gen)
        return torch.softmax(self.head(x), dim=1)


def _init_parameters(net: BayesianUNet, seed: int) -> None:
    """He-style init drawn from a dedicated generator (fixed parameter order)."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in net.named_parameters():
            if name.endswith("bias"):
                p.zero_()
            else:
                fan_in = p[0].numel()
                std = math.sqrt(2.0 / fan_in)
                p.copy_(torch.randn(p.shape, generator=gen) * std)


@dataclass
class ModelState:
    """Weights plus the config needed to rebuild an identical predictor."""

    net: BayesianUNet
    config: NetConfig
    val_loss_best: float = math.inf
    _mc_forward_count: int = field(default=0, repr=False, compare=False)

    def clone(self) -> "ModelState":
        return ModelState(
            net=copy.deepcopy(self.net),
            config=self.config,
            val_loss_best=self.val_loss_best,
        )


def init_model(cfg: NetConfig, seed: int) -> ModelState:
    net = BayesianUNet(cfg)
    _init_parameters(net, seeds.derive_seed(seed, seeds.INIT))
    return ModelState(net=net, config=cfg)


def mc_predict(
    state: ModelState,
    sub_image: np.ndarray,
    samples: int,
    seed: int,
    dropout: bool = True,
) -> np.ndarray:
    """Mean softmax output over `samples` stochastic forward passes.

    Sample t draws its dropout masks from a generator seeded with
    seeds.sample_seed(seed, t), so a one-sample call seeded with that value
    reproduces sample t exactly and the T-sample output is identically their
    running mean. With dropout=False the (deterministic) plain forward pass
    is averaged instead.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    d = state.config.tile_size
    sub_image = np.asarray(sub_image)
    if sub_image.shape != (d, d):
        raise ValueError(f"sub-image must be {d}x{d}, got {sub_image.shape}")
    x = torch.from_numpy(sub_image.astype(np.float32))[None, None]
    acc = torch.zeros(
        (state.config.num_classes, d, d), dtype=torch.float64
    )
    with torch.no_grad():
        for t in range(samples):
            gen = None
            if dropout:
                gen = torch.Generator().manual_seed(seeds.sample_seed(seed, t))
            probs = state.net(x, gen)[0]
            acc += probs.double()
            state._mc_forward_count += 1
    mean = (acc / samples).permute(1, 2, 0).numpy()
    return mean.astype(np.float32)


def predict_image(
    state: ModelState,
    image: LargeImage,
    grid: TileGrid,
    samples: int,
    seed: int,
    dropout: bool = True,
) -> ProbabilityMap:
    """MC-predict every tile of the grid and average the overlaps.

    Tile i uses the stream seeded with seed XOR i, so per-tile predictions
    are independent of evaluation order (and of any other tile).
    """
    pieces = []
    for i, tile in enumerate(grid):
        probs = mc_predict(
            state, extract(image, tile), samples, seeds.tile_seed(seed, i), dropout=dropout
        )
        pieces.append((tile, probs))
    return stitch(pieces, grid.source_shape)


# ---------------------------------------------------------------------------
# BNET1 serialization
# ---------------------------------------------------------------------------
#
#   BNET1 <tile_size> <num_classes> <depth> <base_channels> <dropout_rate> <val_loss_best>
#   PARAM <name> <dim0> <dim1> ...      (one line per parameter, module order)
#   DATA
#   <raw float32 little-endian arrays, concatenated in PARAM order>


def save_model(state: ModelState, path: str | Path) -> None:
    cfg = state.config
    lines = [
        f"BNET1 {cfg.tile_size} {cfg.num_classes} {cfg.depth} "
        f"{cfg.base_channels} {cfg.dropout_rate!r} {state.val_loss_best!r}"
    ]
    blobs = []
    for name, p in state.net.named_parameters():
        dims = " ".join(str(s) for s in p.shape)
        lines.append(f"PARAM {name} {dims}".rstrip())
        blobs.append(p.detach().numpy().astype("<f4").tobytes())
    header = ("\n".join(lines) + "\nDATA\n").encode("ascii")
    io.atomic_write(path, header + b"".join(blobs))


def load_model(path: str | Path) -> ModelState:
    raw = Path(path).read_bytes()
    marker = b"\nDATA\n"
    split = raw.find(marker)
    if split < 0 or not raw.startswith(b"BNET1 "):
        raise io.FormatError(f"{path}: not a BNET1 file")
    header_lines = raw[:split].decode("ascii").splitlines()
    payload = raw[split + len(marker):]
    head = header_lines[0].split()
    if len(head) != 7:
        raise io.FormatError(f"{path}: malformed BNET1 header")
    try:
        cfg = NetConfig(
            tile_size=int(head[1]),
            num_classes=int(head[2]),
            depth=int(head[3]),
            base_channels=int(head[4]),
            dropout_rate=float(head[5]),
        )
        val_loss_best = float(head[6])
    except ValueError as exc:
        raise io.FormatError(f"{path}: malformed BNET1 header") from exc
    net = BayesianUNet(cfg)
    params = dict(net.named_parameters())
    offset = 0
    seen = []
    with torch.no_grad():
        for line in header_lines[1:]:
            parts = line.split()
            if parts[0] != "PARAM":
                raise io.FormatError(f"{path}: unexpected header line {line!r}")
            name = parts[1]
            shape = tuple(int(v) for v in parts[2:])
            if name not in params:
                raise io.FormatError(f"{path}: unknown parameter {name!r}")
            p = params[name]
            if tuple(p.shape) != shape:
                raise io.FormatError(
                    f"{path}: parameter {name} has shape {shape}, expected {tuple(p.shape)}"
                )
            n = p.numel() * 4
            chunk = payload[offset : offset + n]
            if len(chunk) != n:
                raise io.FormatError(f"{path}: truncated parameter data")
            offset += n
            arr = np.frombuffer(chunk, dtype="<f4").reshape(shape)
            p.copy_(torch.from_numpy(arr.copy()))
            seen.append(name)
    if offset != len(payload):
        raise io.FormatError(f"{path}: {len(payload) - offset} trailing bytes")
    if set(seen) != set(params):
        missing = sorted(set(params) - set(seen))
        raise io.FormatError(f"{path}: missing parameters {missing}")
    return ModelState(net=net, config=cfg, val_loss_best=val_loss_best)
