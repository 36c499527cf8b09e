# ============================================================================
# found_tts/corpus/matcher.py
# ============================================================================

"""
Template Matcher
================

Decodes a log-mel spectrogram back into symbols: each frame is either silent
(total mel power under a threshold) or labelled with the template whose
centered log-mel profile has the highest cosine. Consecutive labels are
merged into runs, runs shorter than `min_run_frames` are dropped, interior
silences become word boundaries.
"""

import itertools
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from ..core.common import EditSummary, MelSpectrogram
from ..dsp.metrics import levenshtein
from .inventory import BOUNDARY, SymbolInventory, centered_unit
from .templates import Voice

__all__ = ['TemplateMatcher', 'SILENCE']

SILENCE = -1


class TemplateMatcher:
    """Frame-level template classifier with run-length decoding"""

    def __init__(
        self,
        inventory: SymbolInventory,
        voice: Optional[Voice] = None,
        silence_log_power: float = -3.0,
        min_run_frames: int = 2,
    ):
        self.inventory = inventory
        self.voice = voice or inventory.voice_for()
        self.silence_log_power = silence_log_power
        self.min_run_frames = min_run_frames
        self.profiles = inventory.profiles(self.voice)

    def frame_scores(self, frames: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Per-frame label index (SILENCE for quiet frames) and best cosine"""
        frames = np.asarray(frames, dtype=np.float64)
        similarity = centered_unit(frames) @ self.profiles.T
        labels = np.argmax(similarity, axis=1)
        confidence = similarity[np.arange(len(frames)), labels]
        silent = logsumexp(frames, axis=1) < self.silence_log_power
        labels = np.where(silent, SILENCE, labels)
        confidence = np.where(silent, 1.0, confidence)
        return labels, confidence

    def confidence(self, mel: MelSpectrogram, symbol: str) -> np.ndarray:
        """Cosine of every frame against one symbol's profile"""
        profile = self.profiles[self.inventory.phonemes.index(symbol)]
        return centered_unit(np.asarray(mel.frames, dtype=np.float64)) @ profile

    def _runs(self, labels: Sequence[int]) -> List[Tuple[int, int]]:
        return [(label, len(list(group))) for label, group in itertools.groupby(labels)]

    def decode(self, mel: MelSpectrogram) -> List[str]:
        labels, _ = self.frame_scores(mel.frames)
        runs = [(label, n) for label, n in self._runs(labels) if n >= self.min_run_frames]
        merged: List[int] = [label for label, _ in self._runs([label for label, _ in runs])]
        while merged and merged[0] == SILENCE:
            merged.pop(0)
        while merged and merged[-1] == SILENCE:
            merged.pop()
        return [BOUNDARY if label == SILENCE else self.inventory.phonemes[label] for label in merged]

    def score(self, mel: MelSpectrogram, reference: Sequence[str]) -> EditSummary:
        """Character-level generation error of a mel against golden symbols"""
        return levenshtein(list(reference), self.decode(mel))
