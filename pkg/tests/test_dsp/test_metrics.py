# ============================================================================
# tests/test_dsp/test_metrics.py
# ============================================================================

"""
Tests for Metric Kernels
========================
"""

import math

import numpy as np
import pytest

from found_tts.core.common import MelSpectrogram
from found_tts.dsp.metrics import dtw_align, dtw_arrays, levenshtein, mcd, measure_snr, mel_cepstrum


class TestMeasureSnr:
    """Test SNR measurement"""

    def test_known_ratio(self):
        """Test a noise at a tenth of the amplitude gives 20 dB"""
        rng = np.random.default_rng(0)
        clean = rng.standard_normal(1000)

        assert measure_snr(clean, 0.1 * clean) == pytest.approx(20.0)

    def test_silent_noise(self):
        """Test silent noise gives +inf"""
        assert measure_snr(np.ones(10), np.zeros(10)) == math.inf

    def test_errors(self):
        """Test shape mismatch and silent clean signal"""
        with pytest.raises(ValueError, match="mismatch"):
            measure_snr(np.ones(10), np.ones(9))
        with pytest.raises(ValueError, match="silent"):
            measure_snr(np.zeros(10), np.ones(10))


class TestLevenshtein:
    """Test edit summaries"""

    def test_identical(self):
        """Test identical sequences have no errors"""
        summary = levenshtein(list("abcd"), list("abcd"))

        assert summary.errors == 0
        assert summary.cer == 0.0

    def test_single_edits(self):
        """Test one substitution, deletion and insertion"""
        assert levenshtein("abc", "axc").substitutions == 1
        assert levenshtein("abc", "ac").deletions == 1
        assert levenshtein("abc", "abxc").insertions == 1
        assert levenshtein("abc", "abxc").cer == pytest.approx(1 / 3)

    def test_substitution_preferred(self):
        """Test ties are broken towards substitutions"""
        summary = levenshtein("ab", "ba")

        assert (summary.substitutions, summary.deletions, summary.insertions) == (2, 0, 0)

    def test_empty_sequences(self):
        """Test empty reference and hypothesis"""
        assert levenshtein([], []).cer == 0.0
        assert levenshtein([], ["a"]).cer == 1.0
        assert levenshtein(["a", "b"], []).deletions == 2

    def test_symbol_lists(self):
        """Test multi-character symbols are compared whole"""
        summary = levenshtein(["pa", "#", "ti"], ["pa", "ti"])

        assert summary.deletions == 1
        assert summary.reference_length == 3


class TestDtw:
    """Test DTW alignment"""

    def test_identity_path(self):
        """Test a sequence aligns diagonally with itself"""
        a = np.random.default_rng(0).standard_normal((6, 3))
        path, cost = dtw_arrays(a, a)

        assert path.pairs == [(i, i) for i in range(6)]
        assert cost == pytest.approx(0.0)

    def test_stretched_sequence(self):
        """Test a repeated-frame copy aligns at zero cost with a valid path"""
        a = np.random.default_rng(1).standard_normal((5, 2))
        b = np.repeat(a, 2, axis=0)
        path, cost = dtw_arrays(a, b)

        assert path.is_valid(5, 10)
        assert cost == pytest.approx(0.0)

    def test_errors(self):
        """Test empty inputs and band mismatch"""
        with pytest.raises(ValueError):
            dtw_arrays(np.zeros((0, 2)), np.zeros((3, 2)))
        with pytest.raises(ValueError, match="Band mismatch"):
            dtw_arrays(np.zeros((2, 2)), np.zeros((3, 3)))
        with pytest.raises(ValueError, match="Unsupported"):
            dtw_align(MelSpectrogram(np.zeros((2, 2))), MelSpectrogram(np.zeros((2, 2))), distance="cosine")


class TestMcd:
    """Test mel-cepstral distortion"""

    def test_self_distance(self):
        """Test MCD of a spectrogram with itself is zero"""
        mel = MelSpectrogram(np.random.default_rng(0).standard_normal((8, 80)).astype(np.float32))

        assert mcd(mel, mel) == pytest.approx(0.0, abs=1e-6)

    def test_level_shift_ignored(self):
        """Test a constant log-gain shift only moves c0"""
        frames = np.random.default_rng(0).standard_normal((8, 80))

        assert mcd(MelSpectrogram(frames), MelSpectrogram(frames + 3.0)) == pytest.approx(0.0, abs=1e-6)

    def test_distortion_positive(self):
        """Test different spectra have positive distortion"""
        rng = np.random.default_rng(0)
        a = MelSpectrogram(rng.standard_normal((8, 80)))
        b = MelSpectrogram(rng.standard_normal((8, 80)))

        assert mcd(a, b) > 0.0
        assert mcd(a, b) == pytest.approx(mcd(b, a), rel=1e-6)

    def test_three_frame_value(self):
        """Test a hand-computed three-frame case on two bands"""
        # two-band orthonormal DCT-II: c1 = (x0 - x1) / sqrt(2)
        ref = MelSpectrogram(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        pred = MelSpectrogram(np.array([[0.0, 0.0], [1.0, 0.0], [4.0, 0.0]]))
        step = 1.0 / math.sqrt(2.0)

        np.testing.assert_allclose(mel_cepstrum(ref.frames)[:, 0], [0.0, step, 2.0 * step])
        # diagonal path; only the last pair differs, by 2 * step
        expected = (10.0 / math.log(10.0)) * math.sqrt(2.0) * (2.0 * step) / 3.0
        assert mcd(ref, pred) == pytest.approx(expected)
        assert mcd(ref, pred) == pytest.approx(20.0 / (3.0 * math.log(10.0)))

    def test_alignment_on_cepstra(self):
        """Test per-frame gain changes neither the alignment nor the distortion"""
        ref = MelSpectrogram(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        pred = MelSpectrogram(ref.frames + np.array([[0.0], [5.0], [-5.0]]))

        assert mcd(ref, pred) == pytest.approx(0.0, abs=1e-9)

    def test_cepstrum_width(self):
        """Test thirteen coefficients without c0"""
        assert mel_cepstrum(np.zeros((4, 80))).shape == (4, 13)

    def test_band_mismatch(self):
        """Test spectrograms with different band counts"""
        with pytest.raises(ValueError, match="Band mismatch"):
            mcd(MelSpectrogram(np.zeros((2, 80))), MelSpectrogram(np.zeros((2, 40))))
