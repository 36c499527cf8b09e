# ============================================================================
# found_tts/model/encoder.py
# ============================================================================

"""
Text Encoder
============

Symbol embedding, a feed-forward pre-net and a reduced CBHG: 1-D conv bank,
residual projections, highway stack and a bidirectional GRU. Output is one
`encoder_dim` state per input symbol.
"""

from typing import List

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from ..core.config import ModelConfig

__all__ = ['Prenet', 'TextEncoder', 'lengths_to_mask']


def lengths_to_mask(lengths: Tensor, max_len: int = None) -> Tensor:
    """(B, max_len) bool mask, True on valid positions"""
    max_len = int(lengths.max().item()) if max_len is None else max_len
    ids = torch.arange(max_len, device=lengths.device)
    return ids.unsqueeze(0) < lengths.unsqueeze(1)


class Prenet(nn.Module):
    """Stack of ReLU linear layers with dropout.

    `always_dropout` keeps dropout active in eval mode, as the decoder
    pre-net does at synthesis time.
    """

    def __init__(self, in_dim: int, out_sizes: List[int], dropout: float, always_dropout: bool = False):
        super().__init__()
        in_sizes = [in_dim] + list(out_sizes[:-1])
        self.layers = nn.ModuleList([nn.Linear(i, o) for i, o in zip(in_sizes, out_sizes)])
        self.dropout = dropout
        self.always_dropout = always_dropout

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_features

    def forward(self, x: Tensor) -> Tensor:
        training = self.training or self.always_dropout
        for linear in self.layers:
            x = F.dropout(F.relu(linear(x)), p=self.dropout, training=training and self.dropout > 0)
        return x


class _Highway(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.transform = nn.Linear(dim, dim)
        self.gate = nn.Linear(dim, dim)
        nn.init.constant_(self.gate.bias, -1.0)

    def forward(self, x: Tensor) -> Tensor:
        gate = torch.sigmoid(self.gate(x))
        return gate * F.relu(self.transform(x)) + (1.0 - gate) * x


class TextEncoder(nn.Module):
    """Pre-net + conv bank + highway + bidirectional GRU"""

    def __init__(self, config: ModelConfig, vocab_size: int):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, config.embedding_dim, padding_idx=0)
        self.prenet = Prenet(config.embedding_dim, config.encoder_prenet_dims, config.prenet_dropout)
        width = self.prenet.out_dim
        self.bank = nn.ModuleList([
            nn.Conv1d(width, config.conv_channels, kernel_size=k, padding=k // 2)
            for k in range(1, config.conv_bank_size + 1)
        ])
        self.projection = nn.Sequential(
            nn.Conv1d(config.conv_bank_size * config.conv_channels, width, kernel_size=3, padding=1),
            nn.ReLU(),
            nn.Conv1d(width, width, kernel_size=3, padding=1),
        )
        self.highways = nn.ModuleList([_Highway(width) for _ in range(config.highway_layers)])
        self.rnn = nn.GRU(width, config.encoder_dim // 2, batch_first=True, bidirectional=True)
        self.output_dim = config.encoder_dim

    def forward(self, text: Tensor, lengths: Tensor) -> Tensor:
        """
        Args:
            text: (B, N) symbol ids, 0 = padding
            lengths: (B,) valid lengths, each >= 1

        Returns:
            (B, N, encoder_dim) memory; padded rows are zero
        """
        if text.numel() == 0 or int(lengths.min().item()) < 1:
            raise ValueError("Encoder input needs at least one symbol per sequence")
        if int(text.max().item()) >= self.embedding.num_embeddings or int(text.min().item()) < 0:
            raise ValueError("Symbol id outside the vocabulary")

        n = text.shape[1]
        mask = lengths_to_mask(lengths, n).unsqueeze(-1)
        x = self.prenet(self.embedding(text)) * mask
        residual = x

        h = x.transpose(1, 2)
        bank = torch.cat([F.relu(conv(h))[:, :, :n] for conv in self.bank], dim=1)
        h = self.projection(bank).transpose(1, 2) + residual
        h = h * mask
        for highway in self.highways:
            h = highway(h)

        packed = pack_padded_sequence(h, lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, _ = self.rnn(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=n)
        return out
