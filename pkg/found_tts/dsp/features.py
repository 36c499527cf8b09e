# ============================================================================
# found_tts/dsp/features.py
# ============================================================================

"""
Mel Feature Extraction
======================

Log-mel analysis with explicit framing (no centering), so an utterance of
`n` samples yields exactly floor((n - window) / hop) + 1 frames. Frames are
Hann-windowed, zero-padded to `fft_size`, projected on a librosa mel
filterbank and log-compressed with a floor.

Also holds the on-disk mel format (flat little-endian float32, row-major,
with a text sidecar) and the fixed normalizer mapping log-mel into the
model's working range.
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, Tuple, Union

import librosa
import numpy as np
import scipy.fft
import scipy.signal

from ..core.common import MelSpectrogram
from ..core.config import FeatureConfig
from ..core.errors import CorpusIOError

__all__ = [
    'mel_spectrogram',
    'expected_frames',
    'samples_for_frames',
    'mel_filterbank',
    'MelNormalizer',
    'write_mel',
    'read_mel',
]

logger = logging.getLogger(__name__)

_MEL_DTYPE = np.dtype("<f4")


@lru_cache(maxsize=8)
def _filterbank(sample_rate: int, fft_size: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    return librosa.filters.mel(
        sr=sample_rate, n_fft=fft_size, n_mels=n_mels, fmin=fmin, fmax=fmax,
    ).astype(np.float64)


@lru_cache(maxsize=8)
def _window(win_length: int) -> np.ndarray:
    return scipy.signal.get_window("hann", win_length, fftbins=True).astype(np.float64)


def mel_filterbank(config: FeatureConfig) -> np.ndarray:
    """(n_mels, fft_size // 2 + 1) filterbank for a feature config"""
    return _filterbank(config.sample_rate, config.fft_size, config.n_mels,
                       config.mel_fmin, config.mel_fmax)


def expected_frames(n_samples: int, config: FeatureConfig) -> int:
    """Frame count produced for a waveform of n_samples"""
    if n_samples < config.win_length:
        return 0
    return (n_samples - config.win_length) // config.hop_length + 1


def samples_for_frames(n_frames: int, config: FeatureConfig) -> int:
    """Shortest waveform length yielding exactly n_frames"""
    return (n_frames - 1) * config.hop_length + config.win_length


def mel_spectrogram(waveform: np.ndarray, config: FeatureConfig = None) -> MelSpectrogram:
    """Compute the log-mel spectrogram of a mono waveform"""
    config = config or FeatureConfig()
    signal = np.asarray(waveform, dtype=np.float64)
    if signal.ndim != 1:
        raise ValueError(f"Expected mono waveform, got shape {signal.shape}")
    if signal.shape[0] < config.win_length:
        raise ValueError(
            f"Waveform of {signal.shape[0]} samples is shorter than one window "
            f"({config.win_length} samples)"
        )

    frames = librosa.util.frame(signal, frame_length=config.win_length,
                                hop_length=config.hop_length, axis=0)
    spectrum = scipy.fft.rfft(frames * _window(config.win_length), n=config.fft_size, axis=1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    mel = power @ mel_filterbank(config).T
    log_mel = np.log(np.maximum(mel, config.log_floor))

    return MelSpectrogram(
        frames=log_mel.astype(np.float32),
        hop_ms=config.hop_ms,
        window_ms=config.window_ms,
        sample_rate=config.sample_rate,
    )


class MelNormalizer:
    """Fixed affine map: log floor -> -1, unit power (log 0) -> 0"""

    def __init__(self, log_floor: float = 1e-5):
        self.floor = float(np.log(log_floor))

    def normalize(self, frames: np.ndarray) -> np.ndarray:
        return ((frames - self.floor) / -self.floor - 1.0).astype(np.float32)

    def denormalize(self, frames: np.ndarray) -> np.ndarray:
        return ((frames + 1.0) * -self.floor + self.floor).astype(np.float32)

    @property
    def silence(self) -> float:
        """Normalized value of a floored (silent) band"""
        return -1.0


# ============================================================================
# MEL FILE FORMAT
# ============================================================================

def _header_path(path: Path) -> Path:
    return path.with_name(path.name + ".txt")


def write_mel(mel: MelSpectrogram, path: Union[str, Path]) -> Path:
    """Write frames as flat <f4 plus a `<name>.txt` sidecar header"""
    path = Path(path)
    header = {
        'frames': mel.n_frames,
        'bands': mel.n_bands,
        'hop_ms': mel.hop_ms,
        'window_ms': mel.window_ms,
        'sample_rate': mel.sample_rate,
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(np.ascontiguousarray(mel.frames, dtype=_MEL_DTYPE).tobytes())
        _header_path(path).write_text(
            "".join(f"{key}={value}\n" for key, value in header.items()), encoding="utf-8"
        )
    except OSError as e:
        raise CorpusIOError(f"Cannot write mel file {path}: {e}") from e
    return path


def _parse_header(text: str) -> Dict[str, str]:
    fields = {}
    for line in text.splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            fields[key.strip()] = value.strip()
    return fields


def read_mel(path: Union[str, Path]) -> MelSpectrogram:
    """Read a mel file written by write_mel"""
    path = Path(path)
    try:
        fields = _parse_header(_header_path(path).read_text(encoding="utf-8"))
        blob = path.read_bytes()
    except OSError as e:
        raise CorpusIOError(f"Cannot read mel file {path}: {e}") from e

    try:
        shape: Tuple[int, int] = (int(fields['frames']), int(fields['bands']))
        data = np.frombuffer(blob, dtype=_MEL_DTYPE)
        frames = data.reshape(shape).astype(np.float32)
    except (KeyError, ValueError) as e:
        raise CorpusIOError(f"Mel file {path} does not match its header: {e}") from e

    return MelSpectrogram(
        frames=frames,
        hop_ms=float(fields.get('hop_ms', 12.5)),
        window_ms=float(fields.get('window_ms', 50.0)),
        sample_rate=int(fields.get('sample_rate', 16000)),
    )
