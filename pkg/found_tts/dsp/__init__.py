"""
Signal-processing and metric kernels: mel analysis, mel file format, SNR,
Levenshtein, DTW and MCD.
"""

from .features import (
    mel_spectrogram,
    expected_frames,
    samples_for_frames,
    mel_filterbank,
    MelNormalizer,
    write_mel,
    read_mel,
)
from .metrics import (
    MCD_CONSTANT,
    measure_snr,
    levenshtein,
    dtw_align,
    dtw_arrays,
    mel_cepstrum,
    mcd,
)

__all__ = [
    'mel_spectrogram',
    'expected_frames',
    'samples_for_frames',
    'mel_filterbank',
    'MelNormalizer',
    'write_mel',
    'read_mel',
    'MCD_CONSTANT',
    'measure_snr',
    'levenshtein',
    'dtw_align',
    'dtw_arrays',
    'mel_cepstrum',
    'mcd',
]
