# ============================================================================
# found_tts/model/losses.py
# ============================================================================

"""
Loss Composition
================

Masked mel and stop-token losses plus the optional branch terms. The total
is additive per mode: baseline terms, then the VQ terms when the VQ branch is
active, then beta times the noise cross-entropy when the adversarial branch
is active.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import torch
import torch.nn.functional as F
from torch import Tensor

from ..core.common import TrainMode
from ..core.config import TrainConfig
from .adversarial import adv_loss, noise_cross_entropy
from .vq import vq_loss_terms

__all__ = ['LossTerms', 'masked_mel_loss', 'masked_mse', 'stop_token_loss', 'compose_losses']


def _mean_over_valid(values: Tensor, mask: Tensor) -> Tensor:
    """Mean of (B, T, D) values over valid frames and all D"""
    weights = mask.to(values.dtype).unsqueeze(-1).expand_as(values)
    return (values * weights).sum() / weights.sum().clamp_min(1.0)


def masked_mel_loss(predicted: Tensor, target: Tensor, mask: Tensor) -> Tensor:
    """L1 + L2 over valid frames; padded frames contribute exactly zero"""
    diff = predicted - target
    return _mean_over_valid(diff.abs(), mask) + _mean_over_valid(diff.pow(2), mask)


def masked_mse(predicted: Tensor, target: Tensor, mask: Tensor) -> Tensor:
    return _mean_over_valid((predicted - target).pow(2), mask)


def stop_token_loss(logits: Tensor, targets: Tensor, mask: Tensor) -> Tensor:
    per_frame = F.binary_cross_entropy_with_logits(logits, targets, reduction="none")
    weights = mask.to(per_frame.dtype)
    return (per_frame * weights).sum() / weights.sum().clamp_min(1.0)


@dataclass
class LossTerms:
    """Active loss terms of one batch"""
    mel: Tensor
    stop: Tensor
    vq_recon: Optional[Tensor] = None
    codebook: Optional[Tensor] = None
    commitment: Optional[Tensor] = None
    noise_ce: Optional[Tensor] = None
    beta: float = 0.0

    @property
    def reconstruction(self) -> Tensor:
        total = self.mel + self.stop
        for term in (self.vq_recon, self.codebook, self.commitment):
            if term is not None:
                total = total + term
        return total

    @property
    def total(self) -> Tensor:
        if self.noise_ce is None:
            return self.reconstruction
        return adv_loss(self.reconstruction, self.noise_ce, self.beta)

    def as_dict(self) -> Dict[str, float]:
        values = {'mel': self.mel, 'stop': self.stop, 'vq_recon': self.vq_recon, 'codebook': self.codebook,
                  'commitment': self.commitment, 'noise_ce': self.noise_ce}
        summary = {name: float(value.detach()) for name, value in values.items() if value is not None}
        summary['total'] = float(self.total.detach())
        return summary


def compose_losses(outputs, batch, train: TrainConfig, mode: Optional[TrainMode] = None) -> LossTerms:
    """
    Loss terms for model outputs on a batch.

    `mode` defaults to `train.mode`; a mode that needs a branch the outputs
    do not carry raises ValueError.
    """
    mode = mode or train.mode
    mask = batch.frame_mask
    terms = LossTerms(
        mel=masked_mel_loss(outputs.mel, batch.mel_targets, mask),
        stop=stop_token_loss(outputs.stop_logits, batch.stop_targets, mask),
    )
    if mode.uses_vq:
        if outputs.vq is None:
            raise ValueError("VQ loss requested but the forward pass ran without the VQ branch")
        terms.vq_recon = masked_mse(outputs.vq_recon, outputs.vq_target, mask)
        terms.codebook, terms.commitment = vq_loss_terms(outputs.vq.z_e, outputs.vq.z_q, train.alpha, mask)
    if mode.uses_adversarial:
        if outputs.noise_logits is None:
            raise ValueError("Adversarial loss requested but the forward pass ran without the noise classifier")
        terms.noise_ce = noise_cross_entropy(outputs.noise_logits, batch.conditions, mask)
        terms.beta = train.beta
    return terms
