# ============================================================================
# found_tts/model/vq.py
# ============================================================================

"""
Vector-Quantized Clustering Branch
==================================

VQ-VAE tapped off the decoder pre-net: a two-layer encoder maps each pre-net
frame to z_e, the nearest codebook entry becomes z_q, and a mirrored decoder
reconstructs the pre-net frame (or the mel frame) from the straight-through
latent. z_q is also injected into the decoder recurrent layer.
"""

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

from ..core.common import CodebookHealth
from ..core.config import ModelConfig
from .gradients import stop_gradient, straight_through

__all__ = [
    'VqOutput',
    'quantize',
    'vq_loss_terms',
    'codebook_health',
    'cluster_purity',
    'CodebookUsage',
    'VQBranch',
]

logger = logging.getLogger(__name__)


@dataclass
class VqOutput:
    z_e: Tensor
    z_q: Tensor
    indices: Tensor
    z_st: Tensor


def quantize(z_e: Tensor, codebook: Tensor) -> VqOutput:
    """
    Nearest codebook entry per vector; the lowest index wins exact ties.

    z_q carries gradient to the codebook (for the codebook loss) and z_st
    carries gradient to z_e only.
    """
    if codebook.ndim != 2 or codebook.shape[0] == 0:
        raise ValueError("Codebook is empty")
    if z_e.shape[-1] != codebook.shape[1]:
        raise ValueError(f"Latent size {z_e.shape[-1]} does not match codebook size {codebook.shape[1]}")

    flat = z_e.reshape(-1, codebook.shape[1])
    with torch.no_grad():
        distances = (
            flat.pow(2).sum(dim=1, keepdim=True)
            - 2.0 * flat @ codebook.t()
            + codebook.pow(2).sum(dim=1).unsqueeze(0)
        )
        indices = torch.argmin(distances, dim=1)
    z_q = F.embedding(indices, codebook).reshape(z_e.shape)
    indices = indices.reshape(z_e.shape[:-1])
    return VqOutput(z_e=z_e, z_q=z_q, indices=indices, z_st=straight_through(z_e, z_q))


def _masked_frame_mean(per_frame: Tensor, mask: Optional[Tensor]) -> Tensor:
    if mask is None:
        return per_frame.mean()
    weights = mask.to(per_frame.dtype)
    return (per_frame * weights).sum() / weights.sum().clamp_min(1.0)


def vq_loss_terms(z_e: Tensor, z_q: Tensor, alpha: float = 0.25,
                  mask: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
    """
    Codebook and commitment losses.

    Squared L2 summed over the latent dimension, averaged over valid frames.
    The codebook term only moves the codebook, the commitment term (weighted
    by alpha) only moves the encoder.
    """
    codebook_loss = _masked_frame_mean((stop_gradient(z_e) - z_q).pow(2).sum(dim=-1), mask)
    commitment_loss = alpha * _masked_frame_mean((z_e - stop_gradient(z_q)).pow(2).sum(dim=-1), mask)
    return codebook_loss, commitment_loss


def _health_from_counts(counts: np.ndarray) -> CodebookHealth:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total == 0:
        return CodebookHealth(perplexity=0.0, dead_entry_count=int(counts.size), total_assignments=0)
    probs = counts[counts > 0] / total
    return CodebookHealth(
        perplexity=float(np.exp(-(probs * np.log(probs)).sum())),
        dead_entry_count=int((counts == 0).sum()),
        total_assignments=int(total),
    )


def codebook_health(indices: Sequence[int], codebook_size: int) -> CodebookHealth:
    """Perplexity and dead-entry count of an assignment history"""
    indices = np.asarray(indices, dtype=np.int64).reshape(-1)
    if indices.size == 0:
        raise ValueError("Codebook health needs at least one assignment")
    return _health_from_counts(np.bincount(indices, minlength=codebook_size))


def cluster_purity(indices: Sequence[int], labels: Sequence[Hashable]) -> float:
    """Share of frames whose code's majority label matches their own label"""
    if len(indices) != len(labels):
        raise ValueError("indices and labels must be aligned")
    if not len(indices):
        return 0.0
    per_code = defaultdict(Counter)
    for index, label in zip(indices, labels):
        per_code[int(index)][label] += 1
    majority = sum(counter.most_common(1)[0][1] for counter in per_code.values())
    return majority / len(indices)


class CodebookUsage:
    """Assignment counters and last-used step per codebook entry"""

    def __init__(self, codebook_size: int):
        self.codebook_size = codebook_size
        self.counts = np.zeros(codebook_size, dtype=np.int64)
        self.last_used = np.zeros(codebook_size, dtype=np.int64)

    def record(self, indices: Tensor, step: int):
        flat = indices.detach().reshape(-1).cpu().numpy()
        self.counts += np.bincount(flat, minlength=self.codebook_size)
        self.last_used[np.unique(flat)] = step

    def dead_entries(self, step: int, window: int) -> np.ndarray:
        return np.flatnonzero(step - self.last_used >= window)

    def reset(self):
        self.counts[:] = 0

    def health(self) -> CodebookHealth:
        return _health_from_counts(self.counts)


class VQBranch(nn.Module):
    """Encoder, codebook, decoder and the decoder-injection projection"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        prenet_dim = config.decoder_prenet_dims[-1]
        recon_dim = prenet_dim if config.vq_recon_target == "prenet" else config.n_mels
        self.recon_target = config.vq_recon_target
        self.encoder = nn.Sequential(
            nn.Linear(prenet_dim, config.vq_hidden_dim),
            nn.ReLU(),
            nn.Linear(config.vq_hidden_dim, config.codebook_dim),
        )
        self.codebook = nn.Parameter(torch.empty(config.codebook_size, config.codebook_dim))
        nn.init.uniform_(self.codebook, -1.0 / config.codebook_size, 1.0 / config.codebook_size)
        self.decoder = nn.Sequential(
            nn.Linear(config.codebook_dim, config.vq_hidden_dim),
            nn.ReLU(),
            nn.Linear(config.vq_hidden_dim, recon_dim),
        )
        self.latent_proj = nn.Linear(config.codebook_dim, 4 * config.decoder_rnn_dim, bias=False)
        self.usage = CodebookUsage(config.codebook_size)

    def encode(self, prenet_frames: Tensor) -> Tensor:
        if prenet_frames.shape[-1] != self.encoder[0].in_features:
            raise ValueError(
                f"VQ encoder expects {self.encoder[0].in_features}-dim frames, got {prenet_frames.shape[-1]}"
            )
        return self.encoder(prenet_frames)

    def forward(self, prenet_frames: Tensor) -> Tuple[VqOutput, Tensor]:
        """Quantize every frame; return the VQ output and its reconstruction"""
        vq = quantize(self.encode(prenet_frames), self.codebook)
        return vq, self.decoder(vq.z_st)

    def reconstruction_target(self, prenet_frames: Tensor, mel_inputs: Tensor) -> Tensor:
        if self.recon_target == "prenet":
            return stop_gradient(prenet_frames)
        return mel_inputs

    @torch.no_grad()
    def restart_dead(self, step: int, window: int, recent_z_e: Tensor, generator: torch.Generator) -> int:
        """Reseed entries unused for `window` steps with random recent latents"""
        if window <= 0 or step < window:
            return 0
        dead = self.usage.dead_entries(step, window)
        pool = recent_z_e.detach().reshape(-1, self.codebook.shape[1])
        if dead.size == 0 or pool.shape[0] == 0:
            return 0
        picks = torch.randint(pool.shape[0], (dead.size,), generator=generator)
        self.codebook[torch.as_tensor(dead)] = pool[picks].to(self.codebook.dtype)
        self.usage.last_used[dead] = step
        logger.debug(f"Restarted {dead.size} dead codebook entries at step {step}")
        return int(dead.size)
