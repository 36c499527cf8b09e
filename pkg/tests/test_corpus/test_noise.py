# ============================================================================
# tests/test_corpus/test_noise.py
# ============================================================================

"""
Tests for Noise Generators and SNR Mixing
=========================================
"""

import math

import numpy as np
import pytest
import soundfile as sf

from found_tts.core.common import NoiseKind
from found_tts.core.errors import CorpusIOError
from found_tts.corpus.noise import PEAK_LIMIT, generate_noise, load_noise_file, mix_noise
from found_tts.corpus.render import render_waveform
from found_tts.dsp.metrics import measure_snr


@pytest.fixture(scope="module")
def clean(small_inventory):
    return render_waveform(["s1", "s2", "#", "s3", "s4"], [8, 6, 5, 7, 9], small_inventory, seed=0)


class TestGenerateNoise:
    """Test the noise generators"""

    @pytest.mark.parametrize("kind", [NoiseKind.WHITE, NoiseKind.PINK, NoiseKind.HUM, NoiseKind.BABBLE])
    def test_unit_rms(self, kind, small_inventory):
        """Test every generator returns unit-RMS noise of the requested length"""
        noise = generate_noise(kind, 4000, seed=1, inventory=small_inventory)

        assert noise.shape == (4000,)
        assert np.sqrt(np.mean(noise ** 2)) == pytest.approx(1.0)

    def test_seeded(self):
        """Test identical seeds give identical noise"""
        np.testing.assert_array_equal(generate_noise(NoiseKind.PINK, 500, seed=(1, 2)),
                                      generate_noise(NoiseKind.PINK, 500, seed=(1, 2)))

    def test_pink_tilts_down(self):
        """Test pink noise has more low-frequency than high-frequency energy"""
        noise = generate_noise(NoiseKind.PINK, 16000, seed=0)
        spectrum = np.abs(np.fft.rfft(noise)) ** 2

        assert spectrum[10:200].mean() > 10 * spectrum[4000:6000].mean()

    def test_babble_needs_inventory(self):
        """Test babble without an inventory"""
        with pytest.raises(ValueError, match="inventory"):
            generate_noise(NoiseKind.BABBLE, 100)

    def test_user_noise_needed(self):
        """Test user-file noise without a loaded file"""
        with pytest.raises(ValueError, match="noise file"):
            generate_noise(NoiseKind.USER_FILE, 100)

    def test_user_noise_looped(self):
        """Test a short recording is tiled to the requested length"""
        source = np.sin(np.arange(900) * 0.3)
        noise = generate_noise(NoiseKind.USER_FILE, 5000, seed=0, user_noise=source)

        assert noise.shape == (5000,)
        assert np.all(np.isfinite(noise))


class TestMixNoise:
    """Test SNR mixing"""

    @pytest.mark.parametrize("snr", [4.0, 8.0, 20.0])
    @pytest.mark.parametrize("kind", [NoiseKind.WHITE, NoiseKind.HUM, NoiseKind.BABBLE])
    def test_exact_snr(self, clean, small_inventory, kind, snr):
        """Test the utterance-level SNR matches the request"""
        mix = mix_noise(clean, kind, snr, seed=2, inventory=small_inventory)

        assert measure_snr(clean * mix.gain, mix.noise) == pytest.approx(snr, abs=1e-6)
        np.testing.assert_allclose(mix.waveform, clean * mix.gain + mix.noise, atol=1e-12)
        assert mix.snr_db == snr

    def test_peak_limited(self):
        """Test a clipping mixture is scaled down and the gain recorded"""
        loud = 0.95 * np.sin(np.arange(8000) * 0.05)
        mix = mix_noise(loud, NoiseKind.WHITE, 0.0, seed=0)

        assert mix.gain < 1.0
        assert np.max(np.abs(mix.waveform)) == pytest.approx(PEAK_LIMIT)
        assert measure_snr(loud * mix.gain, mix.noise) == pytest.approx(0.0, abs=1e-6)

    def test_infinite_snr(self, clean):
        """Test +inf SNR returns an unmodified copy"""
        mix = mix_noise(clean, NoiseKind.WHITE, math.inf)

        np.testing.assert_array_equal(mix.waveform, clean)
        assert mix.waveform is not clean
        assert not np.any(mix.noise)
        assert mix.gain == 1.0

    def test_silent_clean(self):
        """Test mixing into silence is rejected"""
        with pytest.raises(ValueError, match="silent"):
            mix_noise(np.zeros(100), NoiseKind.WHITE, 4.0)


class TestNoiseFile:
    """Test user noise files"""

    def test_resampled_to_mono(self, tmp_path):
        """Test stereo 8 kHz noise becomes mono at the corpus rate"""
        path = tmp_path / "noise.wav"
        rng = np.random.default_rng(0)
        sf.write(str(path), 0.1 * rng.standard_normal((8000, 2)), 8000)

        noise = load_noise_file(path, 16000)

        assert noise.ndim == 1
        assert abs(len(noise) - 16000) <= 2

    def test_missing_file(self, tmp_path):
        """Test a missing file raises CorpusIOError"""
        with pytest.raises(CorpusIOError):
            load_noise_file(tmp_path / "absent.wav", 16000)

    def test_silent_file(self, tmp_path):
        """Test an all-zero file is rejected"""
        path = tmp_path / "silent.wav"
        sf.write(str(path), np.zeros(1000), 16000)

        with pytest.raises(CorpusIOError, match="silent"):
            load_noise_file(path, 16000)
