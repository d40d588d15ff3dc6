"""Task losses and the rotating total-loss weighting.

Focal loss -(1 - p)^gamma log(p) for every classification head, smooth-L1
for box regression (masked to keypoint cells), and a weighted total whose
fixed weight multiset {0.98, 0.95, 0.90, 0.85, 0.80} is reassigned to the
five task losses by loss-magnitude rank. Map reductions are means so the
weights keep their scale meaning across rasters of different sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeMismatchError

TASK_ORDER = ("keypoint", "box", "rotation", "semantic", "motion")
WEIGHT_SET = (0.98, 0.95, 0.90, 0.85, 0.80)


@dataclass(frozen=True)
class LossWeights:
    """Weights in task order (kp, box, rot, sem, mot) plus the rank assignment.

    ``per_task`` must be a permutation of the fixed weight multiset;
    ``ranks[i]`` records which rank (0 = largest weight) task i received.
    """

    per_task: tuple
    ranks: tuple

    def __post_init__(self):
        per_task = tuple(float(w) for w in self.per_task)
        ranks = tuple(int(r) for r in self.ranks)
        if sorted(per_task, reverse=True) != sorted(WEIGHT_SET, reverse=True):
            raise ValueError(f"weights must be a permutation of {WEIGHT_SET}")
        if sorted(ranks) != list(range(5)):
            raise ValueError("ranks must be a permutation of 0..4")
        object.__setattr__(self, "per_task", per_task)
        object.__setattr__(self, "ranks", ranks)

    @classmethod
    def in_task_order(cls) -> "LossWeights":
        """Largest weight to the first task, and so on."""
        return cls(WEIGHT_SET, tuple(range(5)))


def focal_loss(p, gamma: float) -> float:
    """-(1 - p)^gamma log(p), mean-reduced when p is an array.

    p is the probability assigned to the correct class and must lie in
    (0, 1]; gamma = 0 reduces to plain cross-entropy.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    arr = np.asarray(p, dtype=np.float64)
    if np.any(arr <= 0.0):
        raise DomainError("probability must be > 0")
    if np.any(arr > 1.0):
        raise DomainError("probability must be <= 1")
    vals = -((1.0 - arr) ** gamma) * np.log(arr)
    return float(np.mean(vals))


def smooth_l1(y_hat, y, beta: float) -> float:
    """Huber-style regression loss, quadratic below beta and linear above.

    Mean-reduced when the inputs are arrays. Continuous and once
    differentiable at |difference| = beta, where both branches give beta/2.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    d = np.abs(np.asarray(y_hat, dtype=np.float64) - np.asarray(y, dtype=np.float64))
    vals = np.where(d < beta, 0.5 * d * d / beta, d - 0.5 * beta)
    return float(np.mean(vals))


def masked_box_loss(pred: np.ndarray, target: np.ndarray,
                    keypoint_mask: np.ndarray, beta: float) -> float:
    """Mean smooth-L1 over the masked (keypoint) cells only; 0 for an empty mask."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(keypoint_mask, dtype=bool)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"pred {pred.shape} vs target {target.shape}")
    if mask.shape != pred.shape[:2]:
        raise ShapeMismatchError(f"mask {mask.shape} vs raster {pred.shape[:2]}")
    if not mask.any():
        return 0.0
    return smooth_l1(pred[mask], target[mask], beta)


def total_loss(losses, weights: LossWeights) -> float:
    """Weighted sum of the five task losses under the given assignment."""
    vals = [float(v) for v in losses]
    if len(vals) != 5:
        raise ValueError("expected 5 task losses")
    if not all(np.isfinite(vals)):
        raise ValueError("losses must be finite")
    return float(sum(w * v for w, v in zip(weights.per_task, vals)))


def rotate_weights(losses) -> LossWeights:
    """Assign the largest weight to the largest-magnitude loss, and so on.

    Ties in magnitude are broken by task order (kp, box, rot, sem, mot).
    """
    vals = [float(v) for v in losses]
    if len(vals) != 5:
        raise ValueError("expected 5 task losses")
    if not all(np.isfinite(vals)):
        raise ValueError("losses must be finite")
    order = sorted(range(5), key=lambda i: (-abs(vals[i]), i))
    per_task = [0.0] * 5
    ranks = [0] * 5
    for rank, task in enumerate(order):
        per_task[task] = WEIGHT_SET[rank]
        ranks[task] = rank
    return LossWeights(tuple(per_task), tuple(ranks))
