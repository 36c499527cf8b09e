# ============================================================================
# tests/test_model/test_batching.py
# ============================================================================

"""
Tests for Vocabulary and Batches
================================
"""

import numpy as np
import pytest
import torch

from found_tts.core.common import NoiseCondition, Split
from found_tts.core.config import TrainConfig
from found_tts.core.errors import ConfigError
from found_tts.corpus.builder import inventory_for_manifest
from found_tts.dsp.features import MelNormalizer
from found_tts.model.batching import PAD_ID, SymbolVocabulary, TrainingExample, collate, iterate_batches, \
    load_training_examples


@pytest.fixture(scope="module")
def corpus_vocab(tiny_corpus):
    return SymbolVocabulary(inventory_for_manifest(tiny_corpus).symbols)


SPEAKERS = {'target': 0, 'auxiliary': 1}


class TestSymbolVocabulary:
    """Test symbol/id mapping"""

    def test_encode_appends_end_marker(self):
        """Test ids start at one and the end marker is appended"""
        vocab = SymbolVocabulary(["s1", "s2", "#", "~"])

        assert len(vocab) == 5
        assert vocab.eos == "~"
        assert vocab.encode(["s1", "#"]) == [1, 3, 4]
        assert vocab.encode(["s2"], add_eos=False) == [2]

    def test_decode(self):
        """Test padding and the end marker are stripped"""
        vocab = SymbolVocabulary(["s1", "s2", "#", "~"])

        assert vocab.decode([1, 3, 2, 4, PAD_ID, PAD_ID]) == ["s1", "#", "s2"]

    def test_errors(self):
        """Test unknown symbols and empty input"""
        vocab = SymbolVocabulary(["s1", "~"])

        with pytest.raises(ValueError, match="Unknown symbol"):
            vocab.encode(["s9"])
        with pytest.raises(ValueError, match="empty"):
            vocab.encode([])
        with pytest.raises(ValueError):
            SymbolVocabulary([])


class TestCollate:
    """Test padded batch construction"""

    def test_layout(self, micro_batch):
        """Test text padding, masks and speaker/condition labels"""
        assert micro_batch.text.tolist() == [[1, 2, 3, 4], [2, 3, 4, 0]]
        assert micro_batch.text_lengths.tolist() == [4, 3]
        assert micro_batch.frame_mask.sum(1).tolist() == [5, 3]
        assert micro_batch.speakers.tolist() == [0, 1]
        assert micro_batch.conditions.tolist() == [0, 1]
        assert micro_batch.size == 2

    def test_go_frame_shift(self, micro_batch):
        """Test decoder inputs are the targets shifted right behind a silence frame"""
        assert torch.all(micro_batch.mel_inputs[:, 0] == -1.0)
        torch.testing.assert_close(micro_batch.mel_inputs[:, 1:], micro_batch.mel_targets[:, :-1])
        assert torch.all(micro_batch.mel_targets[1, 3:] == -1.0)

    def test_stop_targets(self, micro_batch):
        """Test the stop target marks the last valid frame only"""
        assert micro_batch.stop_targets.tolist() == [[0, 0, 0, 0, 1], [0, 0, 1, 0, 0]]

    def test_empty(self):
        """Test an empty batch is rejected"""
        with pytest.raises(ValueError):
            collate([])

    def test_iterate_batches(self):
        """Test one epoch visits every example once"""
        examples = [
            TrainingExample(str(i), [1, 2], np.zeros((i + 1, 4), dtype=np.float32), 0, NoiseCondition.CLEAN)
            for i in range(7)
        ]
        batches = list(iterate_batches(examples, 3, np.random.default_rng(0)))

        assert [b.size for b in batches] == [3, 3, 1]
        assert sorted(i for b in batches for i in b.ids) == sorted(e.id for e in examples)


class TestLoadTrainingExamples:
    """Test example selection from the tiny corpus"""

    def test_clean_target(self, tiny_corpus, corpus_vocab):
        """Test the clean baseline uses only target training utterances"""
        examples = load_training_examples(tiny_corpus, TrainConfig(), corpus_vocab, MelNormalizer(), SPEAKERS)

        assert len(examples) == 6
        assert {e.condition for e in examples} == {NoiseCondition.CLEAN}
        assert {e.speaker for e in examples} == {0}
        for example in examples:
            assert example.text == corpus_vocab.encode(example.symbols)
            assert example.mel.min() >= -1.0 - 1e-5

    def test_noisy_with_auxiliary(self, tiny_corpus, corpus_vocab):
        """Test noisy target audio plus both auxiliary copies"""
        train = TrainConfig(audio_source="noisy", use_auxiliary=True)
        examples = load_training_examples(tiny_corpus, train, corpus_vocab, MelNormalizer(), SPEAKERS)

        assert len(examples) == 6 + 12
        conditions = [e.condition for e in examples]
        assert conditions.count(NoiseCondition.CLEAN) == 6
        assert {e.speaker for e in examples} == {0, 1}

    def test_corrupted_text(self, tiny_corpus, corpus_vocab):
        """Test the CER level selects the corrupted transcripts"""
        train = TrainConfig(cer_level=0.233)
        examples = load_training_examples(tiny_corpus, train, corpus_vocab, MelNormalizer(), SPEAKERS)
        records = {r.id: r for r in tiny_corpus.records}

        for example in examples:
            assert example.text == corpus_vocab.encode(records[example.id].transcript_at(0.233))

    def test_missing_level(self, tiny_corpus, corpus_vocab):
        """Test a CER level the corpus lacks"""
        with pytest.raises(ConfigError, match="cer_level"):
            load_training_examples(tiny_corpus, TrainConfig(cer_level=0.117), corpus_vocab, MelNormalizer(), SPEAKERS)

    def test_limit_and_split(self, tiny_corpus, corpus_vocab):
        """Test the target limit and loading another split"""
        limited = load_training_examples(tiny_corpus, TrainConfig(), corpus_vocab, MelNormalizer(), SPEAKERS,
                                         limit=2)
        dev = load_training_examples(tiny_corpus, TrainConfig(), corpus_vocab, MelNormalizer(), SPEAKERS,
                                     split=Split.DEV)

        assert len(limited) == 2
        assert len(dev) == 1
