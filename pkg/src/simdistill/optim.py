"""SGD with momentum and weight decay, plus the warmup+cosine epoch schedule.

Update rule per parameter: g' = g + wd*p; buf = momentum*buf + g'; p -= lr*buf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import DimensionError, Tensor


@dataclass
class OptimizerState:
    momentum_buffers: list[np.ndarray]
    step_count: int = 0


def init_optimizer(params: list[Tensor]) -> OptimizerState:
    return OptimizerState(momentum_buffers=[np.zeros_like(p.data) for p in params])


def sgd_step(
    params: list[Tensor],
    grads: list[np.ndarray | None],
    state: OptimizerState,
    lr: float,
    momentum: float = 0.0,
    weight_decay=0.0,
) -> None:
    """In-place SGD update. weight_decay may be a scalar or one value per param
    (so bias tensors can opt out of decay)."""
    if lr < 0:
        raise ValueError(f"lr must be >= 0, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    if len(params) != len(grads) or len(params) != len(state.momentum_buffers):
        raise DimensionError(
            f"param/grad/buffer counts differ: {len(params)}/{len(grads)}/{len(state.momentum_buffers)}"
        )
    if np.isscalar(weight_decay):
        decays = [float(weight_decay)] * len(params)
    else:
        decays = [float(w) for w in weight_decay]
        if len(decays) != len(params):
            raise DimensionError(f"{len(decays)} weight decays for {len(params)} params")
    if any(w < 0 for w in decays):
        raise ValueError("weight_decay must be >= 0")

    for p, g, buf, wd in zip(params, grads, state.momentum_buffers, decays):
        if g is None:
            g = np.zeros_like(p.data)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape or buf.shape != p.data.shape:
            raise DimensionError(
                f"sgd_step shape mismatch: param {p.data.shape}, grad {g.shape}, buffer {buf.shape}"
            )
        g_eff = g + wd * p.data
        buf *= momentum
        buf += g_eff
        p.data -= lr * buf
    state.step_count += 1


@dataclass
class LrSchedule:
    """Linear warmup to base_lr over warmup_epochs, then cosine decay to 0."""

    base_lr: float
    warmup_epochs: int = 0
    total_epochs: int = field(default=1)

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be > 0, got {self.base_lr}")
        if self.warmup_epochs < 0:
            raise ValueError(f"warmup_epochs must be >= 0, got {self.warmup_epochs}")
        if self.total_epochs <= self.warmup_epochs:
            raise ValueError(
                f"total_epochs ({self.total_epochs}) must exceed warmup_epochs ({self.warmup_epochs})"
            )


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    if not 0 <= epoch <= schedule.total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {schedule.total_epochs}]")
    w = schedule.warmup_epochs
    if epoch < w:
        return schedule.base_lr * (epoch + 1) / w
    span = schedule.total_epochs - w
    return schedule.base_lr * 0.5 * (1.0 + math.cos(math.pi * (epoch - w) / span))
