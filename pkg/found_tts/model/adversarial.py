# ============================================================================
# found_tts/model/adversarial.py
# ============================================================================

"""
Adversarial Noise Branch
========================

A unidirectional GRU over decoder pre-net frames produces the latent z_s that
replaces the pre-net output as the attention query source and also feeds the
decoder LSTM gates through `latent_proj`. A clean/noisy
classifier sits behind a gradient reversal layer, either per frame or on the
[mean; variance] pool of a whole utterance.
"""

from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

from ..core.common import Granularity
from ..core.config import ModelConfig
from .gradients import gradient_reversal

__all__ = [
    'AdversarialBranch',
    'NoiseClassifier',
    'sentence_pool',
    'noise_cross_entropy',
    'adv_loss',
]


class AdversarialBranch(nn.Module):
    """G_adv: GRU over pre-net frames; causal by construction"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.gru = nn.GRU(config.decoder_prenet_dims[-1], config.adv_gru_dim, batch_first=True)
        self.latent_proj = nn.Linear(config.adv_gru_dim, 4 * config.decoder_rnn_dim, bias=False)

    def forward(self, prenet_frames: Tensor, hidden: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        """(B, T, P) frames -> (B, T, adv_gru_dim) latents and the final hidden state"""
        if prenet_frames.shape[1] == 0:
            raise ValueError("Adversarial branch needs at least one frame")
        return self.gru(prenet_frames, hidden)


def sentence_pool(z_s: Tensor, mask: Optional[Tensor] = None) -> Tensor:
    """
    [mean; population variance] over the valid frames of each utterance.

    A single-frame utterance pools to zero variance.
    """
    if mask is None:
        mask = z_s.new_ones(z_s.shape[:2], dtype=torch.bool)
    weights = mask.to(z_s.dtype).unsqueeze(-1)
    count = weights.sum(dim=1).clamp_min(1.0)
    mean = (z_s * weights).sum(dim=1) / count
    variance = (((z_s - mean.unsqueeze(1)) ** 2) * weights).sum(dim=1) / count
    return torch.cat([mean, variance], dim=-1)


class NoiseClassifier(nn.Module):
    """Clean/noisy classifier behind a gradient reversal layer"""

    def __init__(self, config: ModelConfig, granularity: Optional[Granularity] = None):
        super().__init__()
        self.granularity = granularity or config.granularity
        in_dim = config.adv_gru_dim * (2 if self.granularity == Granularity.SENTENCE else 1)
        self.net = nn.Sequential(
            nn.Linear(in_dim, config.adv_hidden_dim),
            nn.ReLU(),
            nn.Linear(config.adv_hidden_dim, 2),
        )

    def classify_frame(self, z_s: Tensor, lambda_: float = 1.0) -> Tensor:
        """(B, T, 2) logits"""
        return self.net(gradient_reversal(z_s, lambda_))

    def classify_sentence(self, z_s: Tensor, mask: Optional[Tensor] = None, lambda_: float = 1.0) -> Tensor:
        """(B, 2) logits"""
        return self.net(gradient_reversal(sentence_pool(z_s, mask), lambda_))

    def forward(self, z_s: Tensor, mask: Optional[Tensor] = None, lambda_: float = 1.0) -> Tensor:
        if self.granularity == Granularity.SENTENCE:
            return self.classify_sentence(z_s, mask, lambda_)
        return self.classify_frame(z_s, lambda_)


def noise_cross_entropy(logits: Tensor, labels: Tensor, mask: Optional[Tensor] = None) -> Tensor:
    """
    Cross-entropy against the utterance label.

    Frame logits (B, T, 2) broadcast the label to every valid frame; sentence
    logits (B, 2) use it directly.
    """
    if logits.ndim == 2:
        return F.cross_entropy(logits, labels)
    per_frame = F.cross_entropy(
        logits.reshape(-1, 2), labels.unsqueeze(1).expand(logits.shape[:2]).reshape(-1), reduction="none"
    ).reshape(logits.shape[:2])
    if mask is None:
        return per_frame.mean()
    weights = mask.to(per_frame.dtype)
    return (per_frame * weights).sum() / weights.sum().clamp_min(1.0)


def adv_loss(mel_loss: Tensor, classifier_ce: Tensor, beta: float) -> Tensor:
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    return mel_loss + beta * classifier_ce
