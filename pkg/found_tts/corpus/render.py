# ============================================================================
# found_tts/corpus/render.py
# ============================================================================

"""
Utterance Rendering
===================

Turns a (symbols, durations) pair into a clean waveform and its mel frames.
The waveform is padded by one window minus one hop so the mel has exactly
sum(durations) frames.
"""

from typing import Optional, Sequence, Union

import numpy as np

from ..core.common import NoiseCondition, ToyUtterance
from ..dsp.features import mel_spectrogram
from .inventory import SymbolInventory
from .templates import Voice, random_phases, render_segments

__all__ = ['render_utterance', 'render_waveform']


def _rng(seed: Union[int, Sequence[int], np.random.Generator]) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def render_waveform(
    symbols: Sequence[str],
    durations: Sequence[int],
    inventory: SymbolInventory,
    seed: Union[int, Sequence[int], np.random.Generator] = 0,
    voice: Optional[Voice] = None,
) -> np.ndarray:
    """Clean waveform for a symbol sequence, float64 samples"""
    if len(symbols) == 0:
        raise ValueError("Cannot render an empty symbol sequence")
    if len(symbols) != len(durations):
        raise ValueError(f"{len(symbols)} symbols but {len(durations)} durations")
    low, high = inventory.duration_range
    for symbol, duration in zip(symbols, durations):
        if duration <= 0:
            raise ValueError(f"Symbol {symbol!r} has non-positive duration {duration}")
        if not low <= duration <= high:
            raise ValueError(f"Duration {duration} for {symbol!r} outside range [{low}, {high}]")
    templates = [inventory.template(symbol) for symbol in symbols]

    features = inventory.features
    voice = voice or inventory.voice_for()
    phases = random_phases(_rng(seed), voice, features.sample_rate)
    hop = features.hop_length
    return render_segments(
        templates,
        [int(d) * hop for d in durations],
        voice,
        features.sample_rate,
        phases,
        tail=features.win_length - hop,
    )


def render_utterance(
    symbols: Sequence[str],
    durations: Sequence[int],
    inventory: SymbolInventory,
    seed: Union[int, Sequence[int], np.random.Generator] = 0,
    voice: Optional[Voice] = None,
    utterance_id: str = "",
    speaker: str = "",
) -> ToyUtterance:
    """Render a clean, uncorrupted utterance"""
    waveform = render_waveform(symbols, durations, inventory, seed, voice)
    mel = mel_spectrogram(waveform, inventory.features)
    return ToyUtterance(
        id=utterance_id,
        speaker=speaker,
        symbols=list(symbols),
        durations=[int(d) for d in durations],
        waveform=waveform,
        sample_rate=inventory.features.sample_rate,
        mel=mel,
        noise_condition=NoiseCondition.CLEAN,
    )
