# ============================================================================
# found_tts/model/acoustic.py
# ============================================================================

"""
Acoustic Model
==============

Attention-based autoregressive mel decoder with speaker and noise
conditioning, plus the optional VQ and adversarial branches.

Per decoder step:

    prenet(y[t-1]) -> [z_s via G_adv] -> attention LSTM -> attention -> c_t
    [attention h ; c_t ; condition] (+ z_q and z_s projections) -> decoder LSTM
    [decoder h ; c_t] -> mel frame, stop logit

Branch modules are built after every base module, so for a fixed seed the
base parameters do not depend on which branches exist, and a forward pass
with the branches switched off is the plain baseline.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
from torch import Tensor

from ..core.checkpoints import Checkpoint
from ..core.common import NoiseCondition
from ..core.config import ModelConfig
from ..core.errors import CheckpointMismatchError
from .adversarial import AdversarialBranch, NoiseClassifier
from .attention import GmmAttentionState, build_attention
from .encoder import Prenet, TextEncoder, lengths_to_mask
from .vq import VqOutput, VQBranch, quantize

__all__ = ['FusedLSTMCell', 'DecoderState', 'ModelOutputs', 'GeneratedFrames', 'AcousticModel']

logger = logging.getLogger(__name__)


class FusedLSTMCell(nn.Module):
    """LSTM cell that accepts an extra gate contribution from another stream"""

    def __init__(self, input_dim: int, hidden_dim: int):
        super().__init__()
        self.hidden_dim = hidden_dim
        self.input_proj = nn.Linear(input_dim, 4 * hidden_dim)
        self.hidden_proj = nn.Linear(hidden_dim, 4 * hidden_dim, bias=False)

    def forward(self, x: Tensor, state: Tuple[Tensor, Tensor],
                extra_gates: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        h, c = state
        gates = self.input_proj(x) + self.hidden_proj(h)
        if extra_gates is not None:
            gates = gates + extra_gates
        i, f, g, o = gates.chunk(4, dim=-1)
        c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h = torch.sigmoid(o) * torch.tanh(c)
        return h, c


@dataclass
class DecoderState:
    attention_hidden: Tuple[Tensor, Tensor]
    decoder_hidden: Tuple[Tensor, Tensor]
    context: Tensor
    attention: Any
    adv_hidden: Optional[Tensor] = None


@dataclass
class ModelOutputs:
    """Teacher-forced forward pass over a batch"""
    mel: Tensor
    stop_logits: Tensor
    alignments: Tensor
    prenet: Tensor
    vq: Optional[VqOutput] = None
    vq_recon: Optional[Tensor] = None
    vq_target: Optional[Tensor] = None
    z_s: Optional[Tensor] = None
    noise_logits: Optional[Tensor] = None
    gmm_means: Optional[Tensor] = None


@dataclass
class GeneratedFrames:
    """Free-running generation for one utterance, normalized mel scale"""
    frames: np.ndarray
    alignments: np.ndarray
    stop_step: int
    truncated: bool
    codebook_indices: Optional[np.ndarray] = None
    gmm_means: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


class AcousticModel(nn.Module):
    """Seq2seq mel generator with optional VQ and adversarial branches"""

    def __init__(self, config: ModelConfig, vocab_size: int, use_vq: bool = False, use_adversarial: bool = False):
        super().__init__()
        self.config = config
        self.vocab_size = vocab_size
        prenet_dim = config.decoder_prenet_dims[-1]
        cond_dim = config.speaker_embedding_dim + config.noise_embedding_dim

        self.encoder = TextEncoder(config, vocab_size)
        self.decoder_prenet = Prenet(config.n_mels, config.decoder_prenet_dims, config.prenet_dropout,
                                     always_dropout=True)
        self.attention_rnn = nn.LSTMCell(prenet_dim + config.encoder_dim, config.attention_rnn_dim)
        self.attention = build_attention(config)
        self.speaker_embedding = nn.Embedding(config.n_speakers, config.speaker_embedding_dim)
        self.noise_embedding = nn.Embedding(len(NoiseCondition), config.noise_embedding_dim)
        self.decoder_rnn = FusedLSTMCell(config.attention_rnn_dim + config.encoder_dim + cond_dim,
                                         config.decoder_rnn_dim)
        self.mel_proj = nn.Linear(config.decoder_rnn_dim + config.encoder_dim, config.n_mels)
        self.stop_proj = nn.Linear(config.decoder_rnn_dim + config.encoder_dim, 1)

        # optional branches last
        self.vq = VQBranch(config) if use_vq else None
        self.adversarial = AdversarialBranch(config) if use_adversarial else None
        self.noise_classifier = NoiseClassifier(config) if use_adversarial else None

    @property
    def has_vq(self) -> bool:
        return self.vq is not None

    @property
    def has_adversarial(self) -> bool:
        return self.adversarial is not None

    def _branches(self, use_vq: Optional[bool], use_adversarial: Optional[bool]) -> Tuple[bool, bool]:
        use_vq = self.has_vq if use_vq is None else use_vq
        use_adversarial = self.has_adversarial if use_adversarial is None else use_adversarial
        if use_vq and not self.has_vq:
            raise ValueError("Model was built without the VQ branch")
        if use_adversarial and not self.has_adversarial:
            raise ValueError("Model was built without the adversarial branch")
        return use_vq, use_adversarial

    # ------------------------------------------------------------------
    # Step functions
    # ------------------------------------------------------------------

    def encode(self, text: Tensor, text_lengths: Tensor) -> Tuple[Tensor, Tensor]:
        memory = self.encoder(text, text_lengths)
        return memory, lengths_to_mask(text_lengths, text.shape[1]).to(memory.device)

    def condition(self, speakers: Tensor, conditions: Tensor) -> Tensor:
        if int(speakers.max().item()) >= self.speaker_embedding.num_embeddings:
            raise ValueError("Speaker id outside the embedding table")
        return torch.cat([self.speaker_embedding(speakers), self.noise_embedding(conditions)], dim=-1)

    def initial_state(self, memory: Tensor, mask: Tensor) -> DecoderState:
        batch = memory.shape[0]
        att = memory.new_zeros(batch, self.config.attention_rnn_dim)
        dec = memory.new_zeros(batch, self.config.decoder_rnn_dim)
        return DecoderState(
            attention_hidden=(att, att.clone()),
            decoder_hidden=(dec, dec.clone()),
            context=memory.new_zeros(batch, memory.shape[2]),
            attention=self.attention.initial_state(memory, mask),
        )

    def decoder_step(
        self,
        prenet_frame: Tensor,
        state: DecoderState,
        memory: Tensor,
        processed_memory: Optional[Tensor],
        mask: Tensor,
        condition: Tensor,
        z_q: Optional[Tensor] = None,
        z_s: Optional[Tensor] = None,
    ) -> Tuple[Tensor, Tensor, Tensor, DecoderState]:
        """
        One decoder step; returns (mel frame, stop logit, alignment, new state).

        z_s drives the attention query and also enters the decoder LSTM. Its
        gate projection is added to the fused input gates, which equals a
        linear layer over the decoder input concatenated with z_s.
        """
        query_source = z_s if z_s is not None else prenet_frame
        att_h, att_c = self.attention_rnn(torch.cat([query_source, state.context], dim=-1),
                                          state.attention_hidden)
        context, alignment, att_state = self.attention(att_h, memory, processed_memory, mask, state.attention)

        decoder_in = torch.cat([att_h, context, condition], dim=-1)
        expected = self.decoder_rnn.input_proj.in_features
        if decoder_in.shape[-1] != expected:
            raise ValueError(f"Decoder fusion input has size {decoder_in.shape[-1]}, expected {expected}")
        extra = self.vq.latent_proj(z_q) if z_q is not None else None
        if z_s is not None:
            adv_gates = self.adversarial.latent_proj(z_s)
            extra = adv_gates if extra is None else extra + adv_gates
        dec_h, dec_c = self.decoder_rnn(decoder_in, state.decoder_hidden, extra)

        out = torch.cat([dec_h, context], dim=-1)
        new_state = DecoderState((att_h, att_c), (dec_h, dec_c), context, att_state, state.adv_hidden)
        return self.mel_proj(out), self.stop_proj(out).squeeze(-1), alignment, new_state

    # ------------------------------------------------------------------
    # Teacher-forced pass
    # ------------------------------------------------------------------

    def forward(
        self,
        text: Tensor,
        text_lengths: Tensor,
        mel_inputs: Tensor,
        speakers: Tensor,
        conditions: Tensor,
        frame_mask: Optional[Tensor] = None,
        use_vq: Optional[bool] = None,
        use_adversarial: Optional[bool] = None,
        grl_lambda: float = 1.0,
    ) -> ModelOutputs:
        if mel_inputs.shape[0] == 0 or mel_inputs.shape[1] == 0:
            raise ValueError("Empty batch")
        use_vq, use_adversarial = self._branches(use_vq, use_adversarial)
        memory, mask = self.encode(text, text_lengths)
        processed = self.attention.prepare(memory)
        condition = self.condition(speakers, conditions)
        prenet = self.decoder_prenet(mel_inputs)

        vq = vq_recon = vq_target = z_s = noise_logits = None
        if use_vq:
            vq, vq_recon = self.vq(prenet)
            vq_target = self.vq.reconstruction_target(prenet, mel_inputs)
        if use_adversarial:
            z_s, _ = self.adversarial(prenet)
            noise_logits = self.noise_classifier(z_s, frame_mask, grl_lambda)

        state = self.initial_state(memory, mask)
        mels: List[Tensor] = []
        stops: List[Tensor] = []
        alignments: List[Tensor] = []
        means: List[Tensor] = []
        for t in range(mel_inputs.shape[1]):
            mel_t, stop_t, alignment, state = self.decoder_step(
                prenet[:, t], state, memory, processed, mask, condition,
                z_q=vq.z_st[:, t] if use_vq else None,
                z_s=z_s[:, t] if use_adversarial else None,
            )
            mels.append(mel_t)
            stops.append(stop_t)
            alignments.append(alignment)
            if isinstance(state.attention, GmmAttentionState):
                means.append(state.attention.means)

        return ModelOutputs(
            mel=torch.stack(mels, dim=1),
            stop_logits=torch.stack(stops, dim=1),
            alignments=torch.stack(alignments, dim=1),
            prenet=prenet,
            vq=vq,
            vq_recon=vq_recon,
            vq_target=vq_target,
            z_s=z_s,
            noise_logits=noise_logits,
            gmm_means=torch.stack(means, dim=1) if means else None,
        )

    def query_features(self, mel_inputs: Tensor) -> Tensor:
        """Attention query source per frame: z_s with the adversarial branch, pre-net output otherwise"""
        prenet = self.decoder_prenet(mel_inputs)
        if self.has_adversarial:
            return self.adversarial(prenet)[0]
        return prenet

    # ------------------------------------------------------------------
    # Free-running generation
    # ------------------------------------------------------------------

    @torch.no_grad()
    def synthesize_frames(
        self,
        text_ids: Sequence[int],
        speaker: int = 0,
        condition: NoiseCondition = NoiseCondition.CLEAN,
        max_steps: int = 1000,
        stop_threshold: float = 0.5,
        go_value: float = -1.0,
        seed: Optional[int] = 0,
        use_vq: Optional[bool] = None,
        use_adversarial: Optional[bool] = None,
    ) -> GeneratedFrames:
        """
        Autoregressive generation until the stop probability exceeds the
        threshold or `max_steps` frames were produced. The decoder pre-net
        keeps dropout on; `seed` fixes it.
        """
        if len(text_ids) == 0:
            raise ValueError("Cannot synthesize an empty symbol sequence")
        if max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        use_vq, use_adversarial = self._branches(use_vq, use_adversarial)

        was_training = self.training
        self.eval()
        device = next(self.parameters()).device
        try:
            with torch.random.fork_rng(devices=[]):
                if seed is not None:
                    torch.manual_seed(seed)
                text = torch.as_tensor([list(text_ids)], dtype=torch.long, device=device)
                lengths = torch.as_tensor([len(text_ids)], dtype=torch.long, device=device)
                memory, mask = self.encode(text, lengths)
                processed = self.attention.prepare(memory)
                cond = self.condition(torch.as_tensor([speaker], device=device),
                                      torch.as_tensor([condition.label], device=device))
                state = self.initial_state(memory, mask)
                frame = memory.new_full((1, self.config.n_mels), go_value)

                frames, alignments, indices, means = [], [], [], []
                stop_step, truncated = max_steps - 1, True
                for t in range(max_steps):
                    prenet = self.decoder_prenet(frame)
                    z_q = z_s = None
                    if use_vq:
                        q = quantize(self.vq.encode(prenet), self.vq.codebook)
                        z_q = q.z_q
                        indices.append(int(q.indices[0]))
                    if use_adversarial:
                        z_s, state.adv_hidden = self.adversarial(prenet.unsqueeze(1), state.adv_hidden)
                        z_s = z_s[:, 0]
                    frame, stop_logit, alignment, state = self.decoder_step(
                        prenet, state, memory, processed, mask, cond, z_q=z_q, z_s=z_s
                    )
                    frames.append(frame[0].cpu().numpy())
                    alignments.append(alignment[0].cpu().numpy())
                    if isinstance(state.attention, GmmAttentionState):
                        means.append(state.attention.means[0].cpu().numpy())
                    if torch.sigmoid(stop_logit[0]).item() > stop_threshold:
                        stop_step, truncated = t, False
                        break
        finally:
            self.train(was_training)

        return GeneratedFrames(
            frames=np.stack(frames).astype(np.float32),
            alignments=np.stack(alignments),
            stop_step=stop_step,
            truncated=truncated,
            codebook_indices=np.asarray(indices, dtype=np.int64) if use_vq else None,
            gmm_means=np.stack(means) if means else None,
        )

    # ------------------------------------------------------------------
    # Checkpoint conversion
    # ------------------------------------------------------------------

    def to_arrays(self) -> Dict[str, np.ndarray]:
        return {name: value.detach().cpu().numpy() for name, value in self.state_dict().items()}

    def load_arrays(self, arrays: Dict[str, np.ndarray]):
        own = self.state_dict()
        missing = sorted(set(own) - set(arrays))
        unexpected = sorted(set(arrays) - set(own))
        if missing or unexpected:
            raise CheckpointMismatchError(
                f"Checkpoint parameters do not match the model (missing {missing[:5]}, unexpected {unexpected[:5]})"
            )
        for name, value in arrays.items():
            if tuple(own[name].shape) != tuple(value.shape):
                raise CheckpointMismatchError(
                    f"Parameter {name} has shape {tuple(value.shape)}, model expects {tuple(own[name].shape)}"
                )
        self.load_state_dict({name: torch.from_numpy(np.array(value)) for name, value in arrays.items()})

    def to_checkpoint(self, step: int, train_config: Dict[str, Any], loss_summary: Dict[str, float],
                      extra: Dict[str, Any]) -> Checkpoint:
        extra = dict(extra)
        extra.update({'vocab_size': self.vocab_size, 'use_vq': self.has_vq,
                      'use_adversarial': self.has_adversarial})
        return Checkpoint(
            arrays=self.to_arrays(),
            step=step,
            model_config=self.config.model_dump(mode="json"),
            train_config=train_config,
            loss_summary=loss_summary,
            extra=extra,
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> 'AcousticModel':
        try:
            config = ModelConfig.model_validate(checkpoint.model_config)
            extra = checkpoint.extra
            model = cls(config, int(extra['vocab_size']), bool(extra.get('use_vq')),
                        bool(extra.get('use_adversarial')))
        except (KeyError, ValueError) as e:
            raise CheckpointMismatchError(f"Checkpoint header does not describe a model: {e}") from e
        model.load_arrays(checkpoint.arrays)
        return model
