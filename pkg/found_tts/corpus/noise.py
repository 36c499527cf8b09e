# ============================================================================
# found_tts/corpus/noise.py
# ============================================================================

"""
Noise Generators and SNR Mixing
===============================

Synthetic noise classes (white, pink, hum, babble) plus a user-file source.
All generators return unit-RMS noise; `mix_noise` scales it so the SNR over
the whole utterance is exactly the requested value, then peak-normalizes the
mixture if it would clip and records the gain.
"""

import logging
import math
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import librosa
import numpy as np
import scipy.fft
import soundfile as sf

from ..core.common import NoiseKind
from ..core.errors import CorpusIOError
from .inventory import SymbolInventory
from .templates import Voice, random_phases, render_segments

__all__ = [
    'NoiseMix',
    'generate_noise',
    'mix_noise',
    'load_noise_file',
    'PEAK_LIMIT',
]

PEAK_LIMIT = 0.99
HUM_FREQUENCY = 50.0
_CROSSFADE_MS = 20.0

logger = logging.getLogger(__name__)


class NoiseMix(NamedTuple):
    """Mixture plus the exact added-noise component, both after gain"""
    waveform: np.ndarray
    noise: np.ndarray
    gain: float
    snr_db: float


def _unit_rms(x: np.ndarray) -> np.ndarray:
    rms = math.sqrt(float(np.mean(x ** 2)))
    if rms == 0.0:
        raise ValueError("Generated noise is silent")
    return x / rms


def _pink(n: int, rng: np.random.Generator) -> np.ndarray:
    spectrum = scipy.fft.rfft(rng.standard_normal(n))
    freqs = np.arange(spectrum.shape[0], dtype=np.float64)
    freqs[0] = 1.0
    spectrum = spectrum / np.sqrt(freqs)
    spectrum[0] = 0.0
    return scipy.fft.irfft(spectrum, n=n)


def _hum(n: int, rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    t = np.arange(n, dtype=np.float64) / sample_rate
    hum = np.zeros(n)
    for k in range(1, 9):
        hum += np.sin(2.0 * np.pi * HUM_FREQUENCY * k * t + rng.uniform(0, 2 * np.pi)) / k
    return hum + 0.05 * rng.standard_normal(n)


def _babble(n: int, rng: np.random.Generator, inventory: SymbolInventory, talkers: int = 6) -> np.ndarray:
    sample_rate = inventory.features.sample_rate
    hop = inventory.features.hop_length
    low, high = inventory.duration_range
    mix = np.zeros(n)
    for _ in range(talkers):
        voice = Voice(f0=float(rng.uniform(90.0, 220.0)), formant_scale=float(rng.uniform(0.9, 1.15)))
        templates, lengths = [], []
        while sum(lengths) < n:
            symbol = inventory.phonemes[int(rng.integers(len(inventory.phonemes)))]
            templates.append(inventory.template(symbol))
            lengths.append(int(rng.integers(low, high + 1)) * hop)
        talker = render_segments(templates, lengths, voice, sample_rate, random_phases(rng, voice, sample_rate))
        offset = int(rng.integers(0, max(1, len(talker) - n + 1)))
        mix += talker[offset:offset + n]
    return mix


def load_noise_file(path: Union[str, Path], sample_rate: int) -> np.ndarray:
    """Read a user noise file as mono float64 at the corpus sample rate"""
    try:
        data, file_rate = sf.read(str(path), dtype='float64', always_2d=True)
    except (RuntimeError, OSError) as e:
        raise CorpusIOError(f"Cannot read noise file {path}: {e}") from e
    mono = data.mean(axis=1)
    if file_rate != sample_rate:
        mono = librosa.resample(mono, orig_sr=file_rate, target_sr=sample_rate)
    if mono.size == 0 or not np.any(mono):
        raise CorpusIOError(f"Noise file {path} is empty or silent")
    return mono


def _loop_with_crossfade(source: np.ndarray, n: int, rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    """Tile a short recording to n samples; joins are linearly cross-faded"""
    start = int(rng.integers(0, len(source)))
    source = np.roll(source, -start)
    if len(source) >= n:
        return source[:n].copy()
    fade = min(int(sample_rate * _CROSSFADE_MS / 1000.0), len(source) // 2)
    out = source.copy()
    ramp = np.linspace(0.0, 1.0, fade) if fade else np.zeros(0)
    while len(out) < n:
        if fade:
            joined = out[-fade:] * (1.0 - ramp) + source[:fade] * ramp
            out = np.concatenate([out[:-fade], joined, source[fade:]])
        else:
            out = np.concatenate([out, source])
    return out[:n]


def generate_noise(
    kind: NoiseKind,
    n_samples: int,
    seed: Union[int, Sequence[int], np.random.Generator] = 0,
    inventory: Optional[SymbolInventory] = None,
    sample_rate: int = 16000,
    user_noise: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Unit-RMS noise of the requested kind"""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if kind == NoiseKind.WHITE:
        noise = rng.standard_normal(n_samples)
    elif kind == NoiseKind.PINK:
        noise = _pink(n_samples, rng)
    elif kind == NoiseKind.HUM:
        noise = _hum(n_samples, rng, sample_rate)
    elif kind == NoiseKind.BABBLE:
        if inventory is None:
            raise ValueError("Babble noise needs a symbol inventory")
        noise = _babble(n_samples, rng, inventory)
    elif kind == NoiseKind.USER_FILE:
        if user_noise is None:
            raise ValueError("User-file noise requested but no noise file was loaded")
        noise = _loop_with_crossfade(np.asarray(user_noise, dtype=np.float64), n_samples, rng, sample_rate)
    else:
        raise ValueError(f"Unknown noise kind: {kind}")
    return _unit_rms(noise)


def mix_noise(
    clean: np.ndarray,
    noise_kind: NoiseKind,
    snr_db: float,
    seed: Union[int, Sequence[int], np.random.Generator] = 0,
    inventory: Optional[SymbolInventory] = None,
    sample_rate: int = 16000,
    user_noise: Optional[np.ndarray] = None,
) -> NoiseMix:
    """Add noise at an exact utterance-level SNR"""
    clean = np.asarray(clean, dtype=np.float64)
    power = float(np.mean(clean ** 2))
    if power <= 0.0:
        raise ValueError("Cannot mix noise into a silent waveform")
    if math.isinf(snr_db) and snr_db > 0:
        return NoiseMix(clean.copy(), np.zeros_like(clean), 1.0, math.inf)

    unit = generate_noise(noise_kind, clean.shape[0], seed, inventory, sample_rate, user_noise)
    noise = unit * math.sqrt(power / (10.0 ** (snr_db / 10.0)))
    mixture = clean + noise

    peak = float(np.max(np.abs(mixture)))
    gain = PEAK_LIMIT / peak if peak > PEAK_LIMIT else 1.0
    return NoiseMix(mixture * gain, noise * gain, gain, float(snr_db))
