"""Deterministic seed derivation shared by every stochastic component.

All randomness in the package flows from one base seed through these helpers,
so identical configs reproduce identical runs bit for bit. Derivation uses a
splitmix64 chain, which is stable across platforms and Python versions
(unlike hash()).
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_MASK63 = (1 << 63) - 1

# fixed integer tags naming each independent stream
INIT = 1
SHUFFLE = 2
DROPOUT = 3
EVAL = 4
CURRICULUM = 5
METHOD2_MAP = 6
FOLD = 7
IMAGE = 8


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(base: int, *tags: int) -> int:
    """Mix integer tags into a base seed; result fits a torch/numpy seed."""
    x = base & _MASK64
    for tag in tags:
        x = _splitmix64(x ^ (tag & _MASK64))
    return x & _MASK63


def tile_seed(base: int, index: int) -> int:
    """Per-tile stream seed: base XOR tile index (the stitching contract)."""
    return (base ^ index) & _MASK63


def sample_seed(base: int, sample_index: int) -> int:
    """Per-MC-sample seed; sample 0 reuses the base so a one-sample call
    seeded with sample_seed(s, t) reproduces sample t of a call seeded s."""
    return (base ^ sample_index) & _MASK63
