# ============================================================================
# found_tts/pipeline/synthesizer.py
# ============================================================================

"""
Synthesizer
===========

Free-running mel generation from a trained checkpoint, plus the on-disk
synthesis artifacts (mel files, alignment matrices and a JSON-lines index)
that evaluation can be recomputed from.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..core.checkpoints import Checkpoint, read_checkpoint
from ..core.common import MelSpectrogram, NoiseCondition, SynthesisResult
from ..core.config import EvalConfig, FeatureConfig
from ..core.errors import CheckpointMismatchError, CorpusIOError
from ..dsp.features import MelNormalizer, read_mel, write_mel
from ..model.acoustic import AcousticModel
from ..model.batching import SymbolVocabulary

__all__ = ['Synthesizer', 'write_synthesis', 'read_synthesis', 'SYNTHESIS_INDEX']

SYNTHESIS_INDEX = "synthesis.jsonl"


class Synthesizer:
    """Generate mels for symbol sequences with one trained model"""

    def __init__(
        self,
        model: AcousticModel,
        vocab: SymbolVocabulary,
        features: FeatureConfig,
        eval_config: Optional[EvalConfig] = None,
        speakers: Optional[Sequence[str]] = None,
        frames_per_symbol: float = 12.5,
        system_id: str = "system",
    ):
        self.model = model
        self.vocab = vocab
        self.features = features
        self.eval_config = eval_config or EvalConfig()
        self.speakers = list(speakers or [])
        self.frames_per_symbol = frames_per_symbol
        self.system_id = system_id
        self.normalizer = MelNormalizer(features.log_floor)
        self.logger = logging.getLogger(self.__class__.__name__)

    @classmethod
    def from_checkpoint(cls, checkpoint: Union[str, Path, Checkpoint],
                        eval_config: Optional[EvalConfig] = None) -> 'Synthesizer':
        if not isinstance(checkpoint, Checkpoint):
            checkpoint = read_checkpoint(checkpoint)
        extra = checkpoint.extra
        try:
            vocab = SymbolVocabulary(extra['vocab'])
            features = FeatureConfig.model_validate(extra['features'])
        except (KeyError, ValueError) as e:
            raise CheckpointMismatchError(f"Checkpoint lacks synthesis metadata: {e}") from e
        model = AcousticModel.from_checkpoint(checkpoint)
        if len(vocab) != model.vocab_size:
            raise CheckpointMismatchError(
                f"Checkpoint vocabulary has {len(vocab)} ids, model embeds {model.vocab_size}"
            )
        return cls(
            model, vocab, features, eval_config,
            speakers=extra.get('speakers'),
            frames_per_symbol=float(extra.get('frames_per_symbol', 12.5)),
            system_id=str(extra.get('system_id', 'system')),
        )

    def speaker_id(self, speaker: Union[int, str, None]) -> int:
        if speaker is None:
            return 0
        if isinstance(speaker, int):
            return speaker
        try:
            return self.speakers.index(speaker)
        except ValueError:
            raise ValueError(f"Unknown speaker {speaker!r}; known: {self.speakers}") from None

    def step_budget(self, n_symbols: int, expected_frames: Optional[int] = None) -> int:
        """Generation cap: max_length_ratio times the expected frame count"""
        expected = expected_frames if expected_frames else n_symbols * self.frames_per_symbol
        return max(1, int(math.ceil(self.eval_config.max_length_ratio * expected)))

    def synthesize(
        self,
        symbols: Sequence[str],
        speaker: Union[int, str, None] = None,
        condition: NoiseCondition = NoiseCondition.CLEAN,
        expected_frames: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> SynthesisResult:
        """
        Generate a mel for a symbol sequence.

        Raises:
            ValueError: empty sequence or a symbol outside the vocabulary
        """
        ids = self.vocab.encode(list(symbols))
        max_steps = self.step_budget(len(symbols), expected_frames)
        seed = self.eval_config.synthesis_seed if seed is None else seed
        generated = self.model.synthesize_frames(
            ids,
            speaker=self.speaker_id(speaker),
            condition=condition,
            max_steps=max_steps,
            stop_threshold=self.eval_config.stop_threshold,
            go_value=self.normalizer.silence,
            seed=seed,
        )
        if generated.truncated:
            self.logger.warning(f"Generation hit the {max_steps}-frame cap without a stop decision")
        mel = MelSpectrogram(
            frames=self.normalizer.denormalize(generated.frames),
            hop_ms=self.features.hop_ms,
            window_ms=self.features.window_ms,
            sample_rate=self.features.sample_rate,
        )
        return SynthesisResult(
            mel=mel,
            alignments=generated.alignments,
            stop_step=generated.stop_step,
            truncated=generated.truncated,
            codebook_indices=generated.codebook_indices,
            metadata={
                'system_id': self.system_id,
                'symbols': list(symbols),
                'condition': condition.value,
                'max_steps': max_steps,
                'seed': seed,
            },
        )


# ============================================================================
# ARTIFACTS
# ============================================================================

def write_synthesis(result: SynthesisResult, utterance_id: str, directory: Union[str, Path]) -> Dict[str, Any]:
    """Write the mel and alignment of one result and append its index entry"""
    directory = Path(directory)
    mel_name = f"{utterance_id}.mel"
    align_name = f"{utterance_id}.align.npy"
    write_mel(result.mel, directory / mel_name)
    entry = {
        'id': utterance_id,
        'mel': mel_name,
        'alignment': align_name,
        'stop_step': result.stop_step,
        'truncated': result.truncated,
        'codebook_indices': result.codebook_indices.tolist() if result.codebook_indices is not None else None,
        'metadata': result.metadata,
    }
    try:
        np.save(directory / align_name, result.alignments)
        with open(directory / SYNTHESIS_INDEX, 'a', encoding='utf-8') as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
    except OSError as e:
        raise CorpusIOError(f"Cannot write synthesis artifacts to {directory}: {e}") from e
    return entry


def read_synthesis(directory: Union[str, Path]) -> Dict[str, SynthesisResult]:
    """Load every result listed in a synthesis index, keyed by utterance id"""
    directory = Path(directory)
    index = directory / SYNTHESIS_INDEX
    results: Dict[str, SynthesisResult] = {}
    try:
        lines: List[str] = index.read_text(encoding='utf-8').splitlines()
    except OSError as e:
        raise CorpusIOError(f"Cannot read synthesis index {index}: {e}") from e
    for line in lines:
        if not line.strip():
            continue
        entry = json.loads(line)
        indices = entry.get('codebook_indices')
        try:
            alignments = np.load(directory / entry['alignment'])
        except OSError as e:
            raise CorpusIOError(f"Cannot read alignment for {entry['id']}: {e}") from e
        results[entry['id']] = SynthesisResult(
            mel=read_mel(directory / entry['mel']),
            alignments=alignments,
            stop_step=int(entry['stop_step']),
            truncated=bool(entry['truncated']),
            codebook_indices=np.asarray(indices, dtype=np.int64) if indices is not None else None,
            metadata=entry.get('metadata', {}),
        )
    return results
