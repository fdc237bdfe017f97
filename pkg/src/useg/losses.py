"""Segmentation losses over per-pixel class distributions.

All functions take predicted probabilities (not logits) shaped (N, C, H, W)
or unbatched (C, H, W), integer truth labels shaped (N, H, W) / (H, W), and
return a non-negative scalar tensor. Every loss is differentiable and is
exercised by the finite-difference gradient checks in the test suite.
"""

from __future__ import annotations

import math

import numpy as np
import torch

CE_CLAMP = 1e-7
DICE_SMOOTHING = 1e-6
DEFAULT_SS_WEIGHT = 0.05

LOSS_KINDS = ("ce", "dice", "ss", "ce+dice", "uncertainty")


def _as_batched(pred, truth, extra=None):
    pred = torch.as_tensor(pred)
    truth = torch.as_tensor(np.asarray(truth)).long()
    if pred.dim() == 3:
        pred = pred[None]
        truth = truth[None]
        if extra is not None:
            extra = torch.as_tensor(extra)[None]
    elif extra is not None:
        extra = torch.as_tensor(extra)
    if pred.dim() != 4:
        raise ValueError(f"expected (N, C, H, W) probabilities, got shape {tuple(pred.shape)}")
    if truth.shape != (pred.shape[0], pred.shape[2], pred.shape[3]):
        raise ValueError(
            f"truth shape {tuple(truth.shape)} does not match predictions {tuple(pred.shape)}"
        )
    if extra is not None and extra.shape != truth.shape:
        raise ValueError(
            f"per-pixel weight shape {tuple(extra.shape)} does not match truth {tuple(truth.shape)}"
        )
    return pred, truth, extra


def _one_hot(truth: torch.Tensor, num_classes: int, dtype: torch.dtype) -> torch.Tensor:
    return (
        torch.nn.functional.one_hot(truth, num_classes)
        .permute(0, 3, 1, 2)
        .to(dtype)
    )


def loss_ce(pred, truth) -> torch.Tensor:
    """Mean over pixels of -log p(true class), probabilities clamped at 1e-7."""
    pred, truth, _ = _as_batched(pred, truth)
    p_true = pred.gather(1, truth.unsqueeze(1)).squeeze(1)
    return -torch.log(p_true.clamp(min=CE_CLAMP)).mean()


def loss_dice(pred, truth) -> torch.Tensor:
    """Soft Dice: mean over classes of 1 - (2*sum(p*g)+eps)/(sum(p)+sum(g)+eps)."""
    pred, truth, _ = _as_batched(pred, truth)
    g = _one_hot(truth, pred.shape[1], pred.dtype)
    dims = (0, 2, 3)
    overlap = (pred * g).sum(dim=dims)
    denom = pred.sum(dim=dims) + g.sum(dim=dims)
    dice = (2.0 * overlap + DICE_SMOOTHING) / (denom + DICE_SMOOTHING)
    return (1.0 - dice).mean()


def loss_ss(pred, truth, weight: float = DEFAULT_SS_WEIGHT) -> torch.Tensor:
    """Sensitivity-specificity loss over squared per-pixel deviations.

    Per class: weight * (squared error averaged over the class's positive
    pixels) + (1 - weight) * (over its negative pixels), then averaged over
    classes. A class absent from the truth contributes 0 through its
    sensitivity term; classes covering everything contribute 0 through
    specificity.
    """
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {weight}")
    pred, truth, _ = _as_batched(pred, truth)
    g = _one_hot(truth, pred.shape[1], pred.dtype)
    dims = (0, 2, 3)
    sq = (g - pred) ** 2
    pos = g.sum(dim=dims)  # truth-derived, constant w.r.t. pred
    neg = (1.0 - g).sum(dim=dims)
    terms = []
    for c in range(pred.shape[1]):
        sens = (sq[:, c] * g[:, c]).sum() / pos[c] if float(pos[c]) > 0 else pred.new_zeros(())
        spec = (sq[:, c] * (1.0 - g[:, c])).sum() / neg[c] if float(neg[c]) > 0 else pred.new_zeros(())
        terms.append(weight * sens + (1.0 - weight) * spec)
    return torch.stack(terms).mean()


def loss_ce_dice(pred, truth) -> torch.Tensor:
    """Plain sum of the cross-entropy and Dice losses."""
    return loss_ce(pred, truth) + loss_dice(pred, truth)


def entropy_of(pred: torch.Tensor) -> torch.Tensor:
    """Per-pixel entropy (natural log) of predicted distributions, (N, H, W)."""
    return -(pred * torch.log(pred.clamp(min=CE_CLAMP))).sum(dim=1)


def loss_uncertainty(pred, truth, frozen_uncertainty, entropy_weight: float) -> torch.Tensor:
    """Cross-entropy plus a frozen-map-weighted normalized-entropy penalty.

    The penalty is entropy_weight * mean(u_i * H(pred_i) / ln C) where u_i
    comes from the uncertainty map frozen at the phase boundary and H is the
    entropy of the current prediction. Reduces exactly to loss_ce at
    entropy_weight = 0; one-hot predictions zero the penalty regardless of u.
    """
    if entropy_weight < 0:
        raise ValueError(f"entropy weight must be >= 0, got {entropy_weight}")
    if frozen_uncertainty is None:
        raise ValueError("the uncertainty loss needs the stage-frozen uncertainty values")
    pred, truth, u = _as_batched(pred, truth, frozen_uncertainty)
    ce = loss_ce(pred, truth)
    if entropy_weight == 0:
        return ce
    h_max = math.log(pred.shape[1])
    penalty = (u.to(pred.dtype) * entropy_of(pred) / h_max).mean()
    return ce + entropy_weight * penalty
