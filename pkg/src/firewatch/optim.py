"""Adam with bias correction and the four epoch-level learning-rate schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

SCHEDULER_KINDS = ("step", "linear", "cosine", "cosine_warmup")


@dataclass(frozen=True)
class SchedulerConfig:
    step_gamma: float = 0.1
    step_size: int = 30
    warmup_epochs: int = 10

    def __post_init__(self):
        if self.step_gamma <= 0:
            raise ValueError("step_gamma must be positive")
        if self.step_size < 1 or self.warmup_epochs < 1:
            raise ValueError("step_size and warmup_epochs must be >= 1")


def scheduler_lr(
    kind: str,
    epoch: int,
    total_epochs: int,
    base_lr: float,
    cfg: SchedulerConfig | None = None,
) -> float:
    """Learning rate for a 0-based epoch.

    step:          base * gamma^floor(epoch / step_size)
    linear:        base * (1 - epoch / total)
    cosine:        base * (1 + cos(pi * epoch / total)) / 2
    cosine_warmup: base * (epoch + 1) / W while epoch < W, then cosine
                   over the remaining total - W epochs.
    """
    cfg = cfg or SchedulerConfig()
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    if base_lr <= 0:
        raise ValueError("base_lr must be positive")
    if kind == "step":
        return base_lr * cfg.step_gamma ** (epoch // cfg.step_size)
    if kind == "linear":
        return base_lr * (1.0 - epoch / total_epochs)
    if kind == "cosine":
        return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))
    if kind == "cosine_warmup":
        w = cfg.warmup_epochs
        if epoch < w:
            return base_lr * (epoch + 1) / w
        span = max(1, total_epochs - w)
        return base_lr * 0.5 * (1.0 + math.cos(math.pi * (epoch - w) / span))
    raise ValueError(f"unknown scheduler kind {kind!r}; expected one of {SCHEDULER_KINDS}")


@dataclass
class AdamState:
    """Step count plus first/second moments, keyed like the parameter registry."""

    step: int = 0
    m: dict[str, torch.Tensor] = field(default_factory=dict)
    v: dict[str, torch.Tensor] = field(default_factory=dict)

    @staticmethod
    def for_params(params: dict[str, torch.Tensor]) -> "AdamState":
        return AdamState(
            step=0,
            m={k: torch.zeros_like(p) for k, p in params.items()},
            v={k: torch.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, torch.Tensor],
    grads: dict[str, torch.Tensor],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, torch.Tensor], AdamState]:
    """One bias-corrected Adam update, applied to ``params`` in place.

    Mutates and returns (params, state). Non-finite gradients abort with the
    offending parameter named.
    """
    if set(params) != set(grads):
        raise ValueError("params and grads must share the same registry keys")
    for name, g in grads.items():
        if not torch.isfinite(g).all():
            raise ValueError(f"non-finite gradient for parameter {name!r}")

    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    with torch.no_grad():
        for name, p in params.items():
            g = grads[name]
            m = state.m[name].mul_(beta1).add_(g, alpha=1.0 - beta1)
            v = state.v[name].mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
            p.addcdiv_(m / bc1, (v / bc2).sqrt().add_(eps), value=-lr)
    return params, state


__all__ = ["SCHEDULER_KINDS", "SchedulerConfig", "scheduler_lr", "AdamState", "adam_step"]
