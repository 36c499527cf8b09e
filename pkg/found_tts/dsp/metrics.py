# ============================================================================
# found_tts/dsp/metrics.py
# ============================================================================

"""
Metric Kernels
==============

SNR measurement, Levenshtein edit summaries, DTW alignment and mel-cepstral
distortion. All functions are pure and safe to call in parallel.
"""

import math
from typing import Hashable, Sequence, Tuple

import librosa
import numpy as np
import scipy.fft

from ..core.common import AlignmentPath, EditSummary, MelSpectrogram

__all__ = [
    'MCD_CONSTANT',
    'N_CEPSTRA',
    'measure_snr',
    'levenshtein',
    'dtw_align',
    'dtw_arrays',
    'mel_cepstrum',
    'mcd',
]

MCD_CONSTANT = 10.0 / math.log(10.0) * math.sqrt(2.0)
N_CEPSTRA = 13


def measure_snr(clean: np.ndarray, noise_component: np.ndarray) -> float:
    """10*log10(sum clean^2 / sum noise^2) in dB; +inf when noise is silent"""
    clean = np.asarray(clean, dtype=np.float64)
    noise = np.asarray(noise_component, dtype=np.float64)
    if clean.shape != noise.shape:
        raise ValueError(f"Length mismatch: clean {clean.shape} vs noise {noise.shape}")
    signal_power = float(np.sum(clean ** 2))
    if signal_power <= 0.0:
        raise ValueError("Clean signal is silent")
    noise_power = float(np.sum(noise ** 2))
    if noise_power == 0.0:
        return math.inf
    return 10.0 * math.log10(signal_power / noise_power)


def levenshtein(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> EditSummary:
    """
    Unit-cost edit distance with an explicit minimal edit script.

    Backtrace prefers substitution (or match), then deletion, then insertion
    when several predecessors are optimal, so counts are deterministic.
    """
    ref = list(ref)
    hyp = list(hyp)
    n, m = len(ref), len(hyp)

    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diagonal = cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            cost[i, j] = min(diagonal, cost[i - 1, j] + 1, cost[i, j - 1] + 1)

    substitutions = deletions = insertions = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i, j] == cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            substitutions += int(ref[i - 1] != hyp[j - 1])
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] == cost[i - 1, j] + 1:
            deletions += 1
            i -= 1
        else:
            insertions += 1
            j -= 1

    errors = substitutions + deletions + insertions
    return EditSummary(
        substitutions=substitutions,
        deletions=deletions,
        insertions=insertions,
        reference_length=n,
        cer=EditSummary.rate(errors, n),
    )


def dtw_arrays(a: np.ndarray, b: np.ndarray) -> Tuple[AlignmentPath, float]:
    """Full (unbanded) DTW over frame matrices (frames x dims), euclidean cost"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("DTW needs two non-empty frame matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"Band mismatch: {a.shape[1]} vs {b.shape[1]}")

    accumulated, warping_path = librosa.sequence.dtw(X=a.T, Y=b.T, metric='euclidean')
    pairs = [(int(i), int(j)) for i, j in warping_path[::-1]]
    return AlignmentPath(pairs), float(accumulated[-1, -1])


def dtw_align(a: MelSpectrogram, b: MelSpectrogram, distance: str = "euclidean") -> Tuple[AlignmentPath, float]:
    """Globally minimal monotone alignment between two mel spectrograms"""
    if distance != "euclidean":
        raise ValueError(f"Unsupported DTW distance: {distance}")
    return dtw_arrays(a.frames, b.frames)


def mel_cepstrum(frames: np.ndarray, n_coefficients: int = N_CEPSTRA) -> np.ndarray:
    """Orthonormal DCT-II of log-mel frames, c1..cN (c0 dropped)"""
    cepstra = scipy.fft.dct(np.asarray(frames, dtype=np.float64), type=2, norm='ortho', axis=1)
    return cepstra[:, 1:n_coefficients + 1]


def mcd(ref: MelSpectrogram, pred: MelSpectrogram) -> float:
    """
    Mel-cepstral distortion in dB averaged over the DTW path.

    Frames are converted to c1..c13 first and the DTW alignment is computed
    on those cepstra, not on the log-mel frames.
    """
    if ref.n_bands != pred.n_bands:
        raise ValueError(f"Band mismatch: {ref.n_bands} vs {pred.n_bands}")
    ref_cep = mel_cepstrum(ref.frames)
    pred_cep = mel_cepstrum(pred.frames)
    path, _ = dtw_arrays(ref_cep, pred_cep)
    index = np.asarray(path.pairs)
    diff = ref_cep[index[:, 0]] - pred_cep[index[:, 1]]
    return float(MCD_CONSTANT * np.mean(np.sqrt(np.sum(diff ** 2, axis=1))))
