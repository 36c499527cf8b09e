# ============================================================================
# tests/test_corpus/test_corruption.py
# ============================================================================

"""
Tests for Transcript Corruption
===============================
"""

import numpy as np
import pytest

from found_tts.corpus.corruption import TranscriptCorruptor, corrupt_transcript
from found_tts.dsp.metrics import levenshtein

REFERENCE = ["s1", "s2", "s3", "#", "s4", "s5", "s6", "#", "s7", "s8", "s1", "s2", "s3", "s4", "s5",
             "#", "s6", "s7", "s8", "s1"]


class TestCorruptTranscript:
    """Test single-utterance corruption"""

    def test_zero_target(self):
        """Test a zero target leaves the transcript untouched"""
        result = corrupt_transcript(REFERENCE, 0.0, seed=0)

        assert result.symbols == REFERENCE
        assert result.achieved_cer == 0.0
        assert result.target_reachable

    def test_achieved_rate_is_measured(self, small_inventory):
        """Test the reported rate is the Levenshtein rate of the output"""
        result = corrupt_transcript(REFERENCE, 0.2, seed=4, inventory=small_inventory)

        assert 0.0 < result.achieved_cer <= 0.2
        assert result.achieved_cer == levenshtein(REFERENCE, result.symbols).cer
        assert result.errors == levenshtein(REFERENCE, result.symbols).errors

    def test_deterministic(self, small_inventory):
        """Test equal seeds give equal corruption"""
        a = corrupt_transcript(REFERENCE, 0.3, seed=(1, 2), inventory=small_inventory)
        b = corrupt_transcript(REFERENCE, 0.3, seed=(1, 2), inventory=small_inventory)

        assert a == b

    def test_substitutions_only(self, small_inventory):
        """Test a substitution-only mix keeps the length"""
        result = corrupt_transcript(REFERENCE, 0.25, mix=(1.0, 0.0, 0.0), seed=0, inventory=small_inventory)

        assert len(result.symbols) == len(REFERENCE)
        assert result.symbols != REFERENCE

    def test_insertions_only(self, small_inventory):
        """Test an insertion-only mix lengthens the transcript"""
        result = corrupt_transcript(REFERENCE, 0.1, mix=(0.0, 0.0, 1.0), seed=0, inventory=small_inventory)

        assert len(result.symbols) == len(REFERENCE) + 2

    def test_drop_boundaries(self):
        """Test deletions are steered onto word boundaries"""
        reference = ["s1", "s2", "#", "s3", "s4", "#", "s5", "s6"]
        result = corrupt_transcript(reference, 0.0, mix=(0.0, 1.0, 0.0), seed=5,
                                    drop_boundaries=True, n_edits=2)

        assert result.symbols == ["s1", "s2", "s3", "s4", "s5", "s6"]

    def test_short_utterance_unreachable(self):
        """Test short utterances flag an unreachable target"""
        assert not corrupt_transcript(["s1", "s2", "s3", "s4"], 0.2, seed=0).target_reachable
        assert corrupt_transcript(["s1", "s2", "s3", "s4", "s5"], 0.2, seed=0).target_reachable

    def test_explicit_edit_count(self):
        """Test n_edits=0 overrides the target"""
        assert corrupt_transcript(REFERENCE, 0.5, seed=0, n_edits=0).symbols == REFERENCE

    @pytest.mark.parametrize("target", [-0.1, 1.0, 1.5])
    def test_target_range(self, target):
        """Test targets outside [0, 1) are rejected"""
        with pytest.raises(ValueError, match="target_cer"):
            corrupt_transcript(REFERENCE, target)

    def test_bad_mix(self):
        """Test the edit mix must be a distribution"""
        with pytest.raises(ValueError, match="Edit mix"):
            corrupt_transcript(REFERENCE, 0.1, mix=(0.5, 0.5, 0.5))


class TestTranscriptCorruptor:
    """Test corpus-level error diffusion"""

    @pytest.mark.parametrize("target", [0.088, 0.117, 0.233])
    def test_corpus_rate(self, small_inventory, target):
        """Test the pooled rate lands on the target despite short utterances"""
        rng = np.random.default_rng(0)
        corruptor = TranscriptCorruptor(target, inventory=small_inventory)
        for _ in range(150):
            symbols, _ = small_inventory.sample_utterance(rng, 3, 12)
            corruptor.corrupt(symbols, rng)

        assert corruptor.corpus_cer == pytest.approx(target, abs=0.01)

    def test_summary(self, small_inventory):
        """Test the summary counts reference symbols and unreachable utterances"""
        corruptor = TranscriptCorruptor(0.233, inventory=small_inventory)
        rng = np.random.default_rng(0)
        corruptor.corrupt(["s1", "s2", "s3"], rng)
        corruptor.corrupt(REFERENCE, rng)

        summary = corruptor.summary()

        assert summary['reference_symbols'] == 23
        assert summary['unreachable_utterances'] == 1
        assert summary['target_cer'] == 0.233
        assert summary['achieved_cer'] == corruptor.corpus_cer

    def test_empty(self):
        """Test an unused corruptor reports zero"""
        assert TranscriptCorruptor(0.1).corpus_cer == 0.0

    def test_invalid_target(self):
        """Test the corruptor checks its target"""
        with pytest.raises(ValueError):
            TranscriptCorruptor(1.2)
