# ============================================================================
# found_tts/corpus/templates.py
# ============================================================================

"""
Pseudo-Phoneme Templates
========================

Each template is a formant-like spectral envelope. Voiced segments are a sum
of harmonics of the speaker's fundamental, weighted by the envelope. With the
default 80 Hz fundamental the signal period equals one analysis hop, so the
steady-state frames of a segment are identical.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

__all__ = [
    'PhonemeTemplate',
    'Voice',
    'SEGMENT_RMS',
    'FADE_MS',
    'partial_amplitudes',
    'render_segments',
    'max_partials',
    'random_phases',
]

SEGMENT_RMS = 0.1
FADE_MS = 5.0
_BASELINE = 0.03


@dataclass(frozen=True)
class PhonemeTemplate:
    """Spectral recipe of one symbol; no formants means silence"""
    symbol: str
    formants: Tuple[Tuple[float, float], ...] = ()  # (center_hz, std_hz)

    @property
    def is_silence(self) -> bool:
        return not self.formants


@dataclass(frozen=True)
class Voice:
    """Speaker-specific rendering parameters"""
    f0: float = 80.0
    formant_scale: float = 1.0


def partial_amplitudes(template: PhonemeTemplate, voice: Voice, sample_rate: int) -> Tuple[np.ndarray, np.ndarray]:
    """Harmonic frequencies below 0.95*Nyquist and their amplitudes at SEGMENT_RMS"""
    n_partials = int(0.95 * (sample_rate / 2) // voice.f0)
    freqs = voice.f0 * np.arange(1, n_partials + 1, dtype=np.float64)
    if template.is_silence:
        return freqs, np.zeros_like(freqs)

    envelope = np.full_like(freqs, _BASELINE)
    for center, std in template.formants:
        center *= voice.formant_scale
        std *= voice.formant_scale
        envelope += np.exp(-0.5 * ((freqs - center) / std) ** 2)

    rms = math.sqrt(float(np.sum(envelope ** 2)) / 2.0)
    return freqs, envelope * (SEGMENT_RMS / rms)


def _fade(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(np.pi * (np.arange(n) + 0.5) / n)


def render_segments(
    templates: List[PhonemeTemplate],
    lengths: List[int],
    voice: Voice,
    sample_rate: int,
    phases: np.ndarray,
    tail: int = 0,
) -> np.ndarray:
    """
    Concatenate template segments of the given sample lengths.

    Harmonic phases run on one global time base so segment joins stay
    phase-continuous; neighbours are cross-faded with complementary
    raised-cosine ramps of FADE_MS. `tail` extra samples extend the last
    segment.
    """
    total = int(sum(lengths)) + tail
    out = np.zeros(total, dtype=np.float64)
    ramp = max(1, int(round(sample_rate * FADE_MS / 1000.0)))
    half = ramp // 2

    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(int)
    for idx, (template, start, length) in enumerate(zip(templates, starts, lengths)):
        end = start + length + (tail if idx == len(templates) - 1 else 0)
        lo = max(0, start - half) if idx > 0 else 0
        hi = min(total, end + half) if idx < len(templates) - 1 else total

        freqs, amps = partial_amplitudes(template, voice, sample_rate)
        if not np.any(amps):
            continue
        t = np.arange(lo, hi, dtype=np.float64) / sample_rate
        segment = amps @ np.sin(2.0 * np.pi * np.outer(freqs, t) + phases[:len(freqs), None])

        gain = np.ones(hi - lo)
        if idx > 0:
            n_in = min(ramp, hi - lo)
            gain[:n_in] = _fade(ramp)[:n_in]
        if idx < len(templates) - 1:
            n_out = min(ramp, hi - lo)
            gain[-n_out:] = _fade(ramp)[::-1][-n_out:]
        out[lo:hi] += segment * gain

    # onset and offset fades
    edge = min(ramp, total // 2)
    if edge:
        out[:edge] *= _fade(edge)
        out[-edge:] *= _fade(edge)[::-1]
    return out


def max_partials(voice: Voice, sample_rate: int) -> int:
    return int(0.95 * (sample_rate / 2) // voice.f0)


def random_phases(rng: np.random.Generator, voice: Optional[Voice], sample_rate: int) -> np.ndarray:
    """Uniform phases, one per harmonic of the voice"""
    n = max_partials(voice or Voice(), sample_rate)
    return rng.uniform(0.0, 2.0 * np.pi, size=n)
