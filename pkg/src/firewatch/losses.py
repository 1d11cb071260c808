"""The three training losses and their unweighted sum.

Reconstruction is scored only where a position is both at a masked timestep
and valid in the source data; land cover is plain cross entropy; hotspot
classification is binary cross entropy on the logit (log-sum-exp form).
The total is eo + lc + cls, accumulated in exactly that order.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F


def loss_eo(
    reconstruction: torch.Tensor,
    target: torch.Tensor,
    step_mask: torch.Tensor,
    validity: torch.Tensor,
) -> torch.Tensor:
    """MSE over positions that are both masked and valid; 0 if there are none.

    ``step_mask`` is (B, T) boolean, ``validity`` (B, T, C); values at unmasked
    or invalid positions never influence the result.
    """
    if reconstruction.shape != target.shape or validity.shape != target.shape:
        raise ValueError(
            f"shape mismatch: recon {tuple(reconstruction.shape)}, "
            f"target {tuple(target.shape)}, validity {tuple(validity.shape)}"
        )
    if step_mask.shape != target.shape[:2]:
        raise ValueError(f"step_mask {tuple(step_mask.shape)} != batch x timesteps")
    counted = step_mask[:, :, None] & validity
    if not counted.any():
        return torch.zeros((), dtype=reconstruction.dtype)
    diff = (reconstruction - target)[counted]
    return (diff * diff).sum() / diff.numel()


def loss_lc(logits: torch.Tensor, categories: torch.Tensor) -> torch.Tensor:
    """Mean cross entropy of the land-cover logits against integer categories."""
    if logits.ndim != 2 or categories.shape != logits.shape[:1]:
        raise ValueError(f"logits {tuple(logits.shape)} vs categories {tuple(categories.shape)}")
    classes = logits.shape[1]
    if categories.min() < 0 or categories.max() >= classes:
        raise ValueError(f"category outside [0, {classes - 1}]")
    return F.cross_entropy(logits, categories)


def loss_cls(logit: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross entropy on the hotspot logit, stable log-sum-exp form."""
    flat = logit.reshape(-1)
    if flat.shape != labels.reshape(-1).shape:
        raise ValueError(f"logit {tuple(logit.shape)} vs labels {tuple(labels.shape)}")
    labels = labels.reshape(-1)
    if not ((labels == 0) | (labels == 1)).all():
        raise ValueError("labels must be binary")
    return F.binary_cross_entropy_with_logits(flat, labels.to(flat.dtype))


def total_loss(eo: torch.Tensor, lc: torch.Tensor, cls: torch.Tensor) -> torch.Tensor:
    """Unweighted sum eo + lc + cls (fixed accumulation order)."""
    for name, term in (("eo", eo), ("lc", lc), ("cls", cls)):
        if not torch.isfinite(term).all():
            raise ValueError(f"non-finite {name} loss")
    return eo + lc + cls


__all__ = ["loss_eo", "loss_lc", "loss_cls", "total_loss"]
