# ============================================================================
# found_tts/model/attention.py
# ============================================================================

"""
Attention Mechanisms
====================

Two interchangeable attention modules with the same step interface:

- GMMAttention: position-only mixture of Gaussians whose means advance by a
  softplus increment every step, so they can never move backwards.
- LocationSensitiveAttention: content scoring plus convolutional features of
  the previous and cumulative alignments.

Both return a probability simplex over the valid memory positions.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

from ..core.common import AttentionKind
from ..core.config import ModelConfig

__all__ = [
    'GmmAttentionState',
    'LsaAttentionState',
    'GMMAttention',
    'LocationSensitiveAttention',
    'gmm_alignment',
    'build_attention',
    'attention_monotonicity',
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class GmmAttentionState:
    """Mixture parameters of the last step; means are (B, K) positions"""
    weights: Tensor
    means: Tensor
    scales: Tensor


@dataclass
class LsaAttentionState:
    """Previous and cumulative alignments, (B, N) each"""
    alignment: Tensor
    cumulative: Tensor


def gmm_alignment(weights: Tensor, means: Tensor, scales: Tensor, mask: Optional[Tensor] = None) -> Tensor:
    """
    Normalized mixture-of-Gaussians alignment over memory positions.

    Args:
        weights: (B, K) mixture weights, rows summing to 1
        means: (B, K) positions; the caller keeps them non-negative. Means past
               the last valid position are allowed and put all mass on it
        scales: (B, K) standard deviations, > 0
        mask: (B, N) bool, True on valid positions; N taken from it

    Returns:
        (B, N) alignment, each row a probability simplex
    """
    if mask is None:
        raise ValueError("gmm_alignment needs a position mask")
    positions = torch.arange(mask.shape[1], device=means.device, dtype=means.dtype).view(1, 1, -1)
    mu = means.unsqueeze(-1)
    sigma = scales.unsqueeze(-1)
    log_weights = torch.log(weights.clamp_min(torch.finfo(weights.dtype).tiny)).unsqueeze(-1)
    log_density = log_weights - torch.log(sigma) - _LOG_SQRT_2PI - 0.5 * ((positions - mu) / sigma) ** 2
    log_phi = torch.logsumexp(log_density, dim=1)
    log_phi = log_phi.masked_fill(~mask, float("-inf"))
    return F.softmax(log_phi, dim=-1)


class GMMAttention(nn.Module):
    """Location-relative GMM attention with softplus mean increments"""

    def __init__(self, query_dim: int, hidden_dim: int, mixtures: int = 5, min_scale: float = 1e-2):
        super().__init__()
        self.mixtures = mixtures
        self.min_scale = min_scale
        self.query_layer = nn.Sequential(
            nn.Linear(query_dim, hidden_dim),
            nn.Tanh(),
            nn.Linear(hidden_dim, 3 * mixtures),
        )

    def prepare(self, memory: Tensor) -> Optional[Tensor]:
        # weights never read memory values
        return None

    def initial_state(self, memory: Tensor, mask: Tensor) -> GmmAttentionState:
        batch = memory.shape[0]
        zeros = memory.new_zeros(batch, self.mixtures)
        return GmmAttentionState(
            weights=torch.full_like(zeros, 1.0 / self.mixtures),
            means=zeros,
            scales=torch.ones_like(zeros),
        )

    def forward(
        self,
        query: Tensor,
        memory: Tensor,
        processed_memory: Optional[Tensor],
        mask: Tensor,
        state: GmmAttentionState,
    ) -> Tuple[Tensor, Tensor, GmmAttentionState]:
        if bool((state.means < 0).any()):
            raise ValueError("GMM attention state means must start at position 0 or later")
        w_hat, delta_hat, sigma_hat = self.query_layer(query).chunk(3, dim=-1)
        weights = F.softmax(w_hat, dim=-1)
        means = state.means + F.softplus(delta_hat)
        scales = F.softplus(sigma_hat) + self.min_scale
        if not (torch.isfinite(weights).all() and torch.isfinite(means).all() and torch.isfinite(scales).all()):
            raise ValueError("GMM attention produced non-finite mixture parameters")

        alignment = gmm_alignment(weights, means, scales, mask)
        context = torch.bmm(alignment.unsqueeze(1), memory).squeeze(1)
        return context, alignment, GmmAttentionState(weights, means, scales)


class _LocationLayer(nn.Module):
    def __init__(self, n_filters: int, kernel_size: int, attention_dim: int):
        super().__init__()
        self.location_conv = nn.Conv1d(2, n_filters, kernel_size, padding=(kernel_size - 1) // 2, bias=False)
        self.location_dense = nn.Linear(n_filters, attention_dim, bias=False)

    def forward(self, attention_weights_cat: Tensor) -> Tensor:
        processed = self.location_conv(attention_weights_cat).transpose(1, 2)
        return self.location_dense(processed)


class LocationSensitiveAttention(nn.Module):
    """Content-based attention with location features"""

    def __init__(self, query_dim: int, memory_dim: int, attention_dim: int, n_filters: int, kernel_size: int):
        super().__init__()
        if kernel_size % 2 == 0:
            raise ValueError("location_kernel must be odd")
        self.query_layer = nn.Linear(query_dim, attention_dim, bias=False)
        self.memory_layer = nn.Linear(memory_dim, attention_dim, bias=False)
        self.v = nn.Linear(attention_dim, 1, bias=False)
        self.location_layer = _LocationLayer(n_filters, kernel_size, attention_dim)

    def prepare(self, memory: Tensor) -> Tensor:
        return self.memory_layer(memory)

    def initial_state(self, memory: Tensor, mask: Tensor) -> LsaAttentionState:
        zeros = memory.new_zeros(memory.shape[0], memory.shape[1])
        return LsaAttentionState(alignment=zeros, cumulative=zeros.clone())

    def forward(
        self,
        query: Tensor,
        memory: Tensor,
        processed_memory: Tensor,
        mask: Tensor,
        state: LsaAttentionState,
    ) -> Tuple[Tensor, Tensor, LsaAttentionState]:
        location = self.location_layer(torch.stack([state.alignment, state.cumulative], dim=1))
        energies = self.v(torch.tanh(self.query_layer(query).unsqueeze(1) + location + processed_memory))
        energies = energies.squeeze(-1)
        if not torch.isfinite(energies).all():
            raise ValueError("Location-sensitive attention produced non-finite energies")

        alignment = F.softmax(energies.masked_fill(~mask, float("-inf")), dim=-1)
        context = torch.bmm(alignment.unsqueeze(1), memory).squeeze(1)
        return context, alignment, LsaAttentionState(alignment, state.cumulative + alignment)


def build_attention(config: ModelConfig) -> Union[GMMAttention, LocationSensitiveAttention]:
    if config.attention == AttentionKind.GMM:
        return GMMAttention(config.attention_rnn_dim, config.attention_dim, config.gmm_mixtures, config.gmm_min_scale)
    return LocationSensitiveAttention(
        config.attention_rnn_dim, config.encoder_dim, config.attention_dim,
        config.location_filters, config.location_kernel,
    )


def attention_monotonicity(alignments: np.ndarray) -> float:
    """
    1 - share of alignment-centroid movement that goes backwards.

    `alignments` is (T, N) for one utterance; a perfectly forward-moving
    alignment scores 1.0, a static one also scores 1.0.
    """
    alignments = np.asarray(alignments, dtype=np.float64)
    if alignments.ndim != 2 or alignments.shape[0] < 2:
        return 1.0
    centroid = alignments @ np.arange(alignments.shape[1], dtype=np.float64)
    steps = np.diff(centroid)
    total = float(np.abs(steps).sum())
    if total == 0.0:
        return 1.0
    return 1.0 - float(np.clip(-steps, 0.0, None).sum()) / total
