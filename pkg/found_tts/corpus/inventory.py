# ============================================================================
# found_tts/corpus/inventory.py
# ============================================================================

"""
Symbol Inventory
================

Pseudo-phoneme symbols `s1..sN`, a word boundary `#` rendered as silence and
an end-of-sequence marker `~` that is only ever fed to the text encoder.

Templates are picked from a mel-spaced grid of three-formant envelopes by
farthest-point selection on the rendered log-mel profiles, so every pair of
phoneme templates stays below the configured cosine similarity.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import librosa
import numpy as np

from ..core.config import CorpusConfig, FeatureConfig, SpeakerConfig
from ..core.errors import ConfigError
from ..dsp.features import mel_spectrogram
from .templates import PhonemeTemplate, Voice, render_segments

__all__ = [
    'BOUNDARY',
    'EOS',
    'SymbolInventory',
    'centered_unit',
]

BOUNDARY = "#"
EOS = "~"

logger = logging.getLogger(__name__)

_PROFILE_FRAMES = 12


def centered_unit(frames: np.ndarray) -> np.ndarray:
    """Remove the per-row mean and scale rows to unit norm"""
    centered = frames - frames.mean(axis=-1, keepdims=True)
    norm = np.linalg.norm(centered, axis=-1, keepdims=True)
    return centered / np.maximum(norm, 1e-12)


def _candidate_templates() -> List[Tuple[Tuple[float, float], ...]]:
    f1 = librosa.mel_frequencies(n_mels=6, fmin=250.0, fmax=900.0)
    f2 = librosa.mel_frequencies(n_mels=7, fmin=900.0, fmax=2800.0)
    f3 = librosa.mel_frequencies(n_mels=3, fmin=2600.0, fmax=4400.0)
    candidates = []
    for a, b, c in itertools.product(f1, f2, f3):
        if b >= 1.5 * a and c >= 1.25 * b:
            candidates.append(tuple((float(f), 0.06 * float(f) + 30.0) for f in (a, b, c)))
    return candidates


@dataclass
class SymbolInventory:
    """Ordered symbols with their spectral templates"""
    phonemes: List[str]
    templates: Dict[str, PhonemeTemplate]
    duration_range: Tuple[int, int]
    features: FeatureConfig
    base_f0: float = 80.0
    _profiles: Dict[Voice, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def build(
        cls,
        corpus: Optional[CorpusConfig] = None,
        features: Optional[FeatureConfig] = None,
        seed: int = 0,
    ) -> 'SymbolInventory':
        """Select distinguishable templates for the configured inventory size"""
        corpus = corpus or CorpusConfig()
        features = features or FeatureConfig()
        base_f0 = corpus.base_f0

        candidates = _candidate_templates()
        probe = cls([], {}, (corpus.min_duration, corpus.max_duration), features, base_f0)
        voice = Voice(f0=base_f0)
        profiles = np.stack([
            probe._render_profile(PhonemeTemplate("?", formants), voice) for formants in candidates
        ])
        similarity = profiles @ profiles.T

        rng = np.random.default_rng(seed)
        selected = [int(rng.integers(len(candidates)))]
        worst = similarity[selected[0]].copy()
        while len(selected) < corpus.n_symbols:
            worst[selected] = np.inf
            best = int(np.argmin(worst))
            if worst[best] >= corpus.template_similarity_max:
                raise ConfigError(
                    f"corpus.n_symbols: only {len(selected)} templates stay below "
                    f"cosine {corpus.template_similarity_max}"
                )
            selected.append(best)
            worst = np.maximum(worst, similarity[best])

        phonemes = [f"s{i + 1}" for i in range(corpus.n_symbols)]
        templates = {
            name: PhonemeTemplate(name, candidates[idx]) for name, idx in zip(phonemes, selected)
        }
        templates[BOUNDARY] = PhonemeTemplate(BOUNDARY)
        inventory = cls(phonemes, templates, (corpus.min_duration, corpus.max_duration), features, base_f0)
        logger.debug(f"Built inventory of {len(phonemes)} templates, "
                     f"max pairwise cosine {inventory.max_similarity():.3f}")
        return inventory

    # ------------------------------------------------------------------
    # Lookup
    # ------------------------------------------------------------------

    @property
    def symbols(self) -> List[str]:
        return list(self.phonemes) + [BOUNDARY, EOS]

    @property
    def renderable(self) -> List[str]:
        return list(self.phonemes) + [BOUNDARY]

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValueError(f"Unknown symbol: {symbol!r}") from None

    def template(self, symbol: str) -> PhonemeTemplate:
        if symbol not in self.templates:
            raise ValueError(f"Unknown or non-renderable symbol: {symbol!r}")
        return self.templates[symbol]

    def check_symbols(self, symbols: Sequence[str]) -> None:
        known = set(self.symbols)
        for symbol in symbols:
            if symbol not in known:
                raise ValueError(f"Unknown symbol: {symbol!r}")

    def voice_for(self, speaker: Optional[SpeakerConfig] = None) -> Voice:
        if speaker is None:
            return Voice(f0=self.base_f0)
        return Voice(f0=self.base_f0 * speaker.f0_scale, formant_scale=speaker.formant_scale)

    # ------------------------------------------------------------------
    # Spectral profiles
    # ------------------------------------------------------------------

    def _render_profile(self, template: PhonemeTemplate, voice: Voice) -> np.ndarray:
        hop = self.features.hop_length
        phases = np.random.default_rng(0).uniform(0.0, 2.0 * np.pi, size=4096)
        wave = render_segments(
            [template], [_PROFILE_FRAMES * hop], voice, self.features.sample_rate,
            phases, tail=self.features.win_length - hop,
        )
        frames = mel_spectrogram(wave, self.features).frames.astype(np.float64)
        steady = frames[3:_PROFILE_FRAMES - 3].mean(axis=0)
        return centered_unit(steady)

    def profiles(self, voice: Optional[Voice] = None) -> np.ndarray:
        """(n_phonemes, n_mels) centered unit log-mel profiles for a voice"""
        voice = voice or Voice(f0=self.base_f0)
        if voice not in self._profiles:
            self._profiles[voice] = np.stack([
                self._render_profile(self.templates[p], voice) for p in self.phonemes
            ])
        return self._profiles[voice]

    def similarity_matrix(self, voice: Optional[Voice] = None) -> np.ndarray:
        profiles = self.profiles(voice)
        return profiles @ profiles.T

    def max_similarity(self, voice: Optional[Voice] = None) -> float:
        sim = self.similarity_matrix(voice)
        off_diagonal = sim[~np.eye(len(sim), dtype=bool)]
        return float(off_diagonal.max()) if off_diagonal.size else 0.0

    def nearest(self, symbol: str) -> Optional[str]:
        """Most confusable other phoneme; None for the boundary"""
        if symbol not in self.phonemes:
            return None
        sim = self.similarity_matrix()
        row = sim[self.phonemes.index(symbol)].copy()
        row[self.phonemes.index(symbol)] = -np.inf
        return self.phonemes[int(np.argmax(row))]

    # ------------------------------------------------------------------
    # Sampling
    # ------------------------------------------------------------------

    def sample_utterance(
        self, rng: np.random.Generator, min_symbols: int = 8, max_symbols: int = 40,
    ) -> Tuple[List[str], List[int]]:
        """Pseudo-words separated by boundaries, no symbol repeated back to back"""
        length = int(rng.integers(min_symbols, max_symbols + 1))
        symbols: List[str] = []
        word = 0
        for i in range(length):
            if 0 < i < length - 1 and word >= 2 and rng.random() < 0.25:
                symbols.append(BOUNDARY)
                word = 0
                continue
            choices = [p for p in self.phonemes if not symbols or p != symbols[-1]]
            symbols.append(choices[int(rng.integers(len(choices)))])
            word += 1
        low, high = self.duration_range
        durations = [int(d) for d in rng.integers(low, high + 1, size=length)]
        return symbols, durations
