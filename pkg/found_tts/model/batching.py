# ============================================================================
# found_tts/model/batching.py
# ============================================================================

"""
Batching
========

Turns manifest records into padded tensor batches for teacher-forced
training: symbol ids with an end marker, normalized mel targets, the
shifted decoder inputs (silence go-frame first), frame masks, stop targets,
speaker and noise-condition labels.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np
import torch
from torch import Tensor

from ..core.common import AudioSource, CorpusManifest, NoiseCondition, Split, SpeakerRole, UtteranceRecord
from ..core.config import CorpusConfig, TrainConfig
from ..core.errors import ConfigError
from ..dsp.features import MelNormalizer, read_mel

__all__ = ['SymbolVocabulary', 'TrainingExample', 'Batch', 'collate', 'iterate_batches', 'load_training_examples']

logger = logging.getLogger(__name__)

PAD_ID = 0


class SymbolVocabulary:
    """Symbol <-> id mapping; id 0 is padding, the last symbol is the end marker"""

    def __init__(self, symbols: Sequence[str]):
        if not symbols:
            raise ValueError("Vocabulary needs at least one symbol")
        self.symbols = list(symbols)
        self._ids = {s: i + 1 for i, s in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols) + 1

    @property
    def eos(self) -> str:
        return self.symbols[-1]

    def encode(self, symbols: Sequence[str], add_eos: bool = True) -> List[int]:
        if not symbols:
            raise ValueError("Cannot encode an empty symbol sequence")
        try:
            ids = [self._ids[s] for s in symbols]
        except KeyError as e:
            raise ValueError(f"Unknown symbol: {e.args[0]!r}") from None
        return ids + [self._ids[self.eos]] if add_eos else ids

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.symbols[i - 1] for i in ids if i != PAD_ID and self.symbols[i - 1] != self.eos]


@dataclass
class TrainingExample:
    id: str
    text: List[int]
    mel: np.ndarray
    speaker: int
    condition: NoiseCondition
    symbols: List[str] = field(default_factory=list)


@dataclass
class Batch:
    """Padded batch; masks are True on valid positions"""
    ids: List[str]
    text: Tensor
    text_lengths: Tensor
    mel_inputs: Tensor
    mel_targets: Tensor
    frame_mask: Tensor
    stop_targets: Tensor
    speakers: Tensor
    conditions: Tensor

    @property
    def size(self) -> int:
        return len(self.ids)

    def to(self, device: torch.device) -> 'Batch':
        moved = {
            name: value.to(device) if isinstance(value, Tensor) else value
            for name, value in self.__dict__.items()
        }
        return Batch(**moved)


def collate(examples: Sequence[TrainingExample], go_value: float = -1.0) -> Batch:
    if not examples:
        raise ValueError("Cannot build an empty batch")
    n_bands = examples[0].mel.shape[1]
    max_text = max(len(e.text) for e in examples)
    max_frames = max(e.mel.shape[0] for e in examples)
    size = len(examples)

    text = torch.zeros(size, max_text, dtype=torch.long)
    targets = torch.full((size, max_frames, n_bands), go_value, dtype=torch.float32)
    mask = torch.zeros(size, max_frames, dtype=torch.bool)
    stop = torch.zeros(size, max_frames, dtype=torch.float32)
    for i, example in enumerate(examples):
        frames = example.mel.shape[0]
        text[i, :len(example.text)] = torch.as_tensor(example.text, dtype=torch.long)
        targets[i, :frames] = torch.from_numpy(np.ascontiguousarray(example.mel, dtype=np.float32))
        mask[i, :frames] = True
        stop[i, frames - 1] = 1.0

    go = torch.full((size, 1, n_bands), go_value, dtype=torch.float32)
    return Batch(
        ids=[e.id for e in examples],
        text=text,
        text_lengths=torch.as_tensor([len(e.text) for e in examples], dtype=torch.long),
        mel_inputs=torch.cat([go, targets[:, :-1]], dim=1),
        mel_targets=targets,
        frame_mask=mask,
        stop_targets=stop,
        speakers=torch.as_tensor([e.speaker for e in examples], dtype=torch.long),
        conditions=torch.as_tensor([e.condition.label for e in examples], dtype=torch.long),
    )


def iterate_batches(examples: Sequence[TrainingExample], batch_size: int, rng: np.random.Generator,
                    go_value: float = -1.0) -> Iterator[Batch]:
    """One shuffled epoch of batches"""
    order = rng.permutation(len(examples))
    for start in range(0, len(order), batch_size):
        yield collate([examples[i] for i in order[start:start + batch_size]], go_value)


def _speaker_roles(manifest: CorpusManifest) -> Dict[str, SpeakerRole]:
    corpus = CorpusConfig.model_validate(manifest.config.get('corpus', {}))
    return {s.name: s.role for s in corpus.speakers}


def _training_text(record: UtteranceRecord, level: float, role: SpeakerRole) -> List[str]:
    try:
        return record.transcript_at(level)
    except KeyError as e:
        if role == SpeakerRole.TARGET:
            raise ConfigError(f"train.cer_level: {e.args[0]}") from None
        return list(record.symbols)


def load_training_examples(
    manifest: CorpusManifest,
    train: TrainConfig,
    vocab: SymbolVocabulary,
    normalizer: MelNormalizer,
    speaker_index: Dict[str, int],
    split: Split = Split.TRAIN,
    limit: Optional[int] = None,
) -> List[TrainingExample]:
    """
    Training examples for one system.

    Target utterances use the configured audio source and CER level. With
    `use_auxiliary` the auxiliary speaker's clean and noisy copies join the
    set; auxiliary text falls back to the golden symbols.
    """
    roles = _speaker_roles(manifest)
    examples: List[TrainingExample] = []
    n_target = 0
    for record in manifest.by_split(split):
        role = roles.get(record.speaker, SpeakerRole.AUXILIARY)
        if role == SpeakerRole.TARGET:
            if train.audio_source == AudioSource.CLEAN:
                mel_path, condition = record.clean_mel_path or record.mel_path, NoiseCondition.CLEAN
            else:
                mel_path, condition = record.mel_path, record.condition
        elif train.use_auxiliary:
            mel_path, condition = record.mel_path, record.condition
        else:
            continue
        if limit is not None and role == SpeakerRole.TARGET:
            if n_target >= limit:
                continue
            n_target += 1
        frames = read_mel(manifest.resolve(mel_path)).frames
        examples.append(TrainingExample(
            id=record.id,
            text=vocab.encode(_training_text(record, train.cer_level, role)),
            mel=normalizer.normalize(frames).astype(np.float32),
            speaker=speaker_index[record.speaker],
            condition=condition,
            symbols=list(record.symbols),
        ))
    if not examples:
        raise ConfigError(f"No {split.value} utterances selected for training")
    logger.info(f"Loaded {len(examples)} {split.value} examples "
                f"(cer_level={train.cer_level}, audio={train.audio_source.value}, "
                f"auxiliary={train.use_auxiliary})")
    return examples
