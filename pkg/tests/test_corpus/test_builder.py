# ============================================================================
# tests/test_corpus/test_builder.py
# ============================================================================

"""
Tests for Corpus Generation and Manifests
=========================================
"""

import json

import numpy as np
import pytest

from found_tts.core.common import NoiseCondition, Split
from found_tts.core.config import ConfigLoader
from found_tts.core.errors import CorpusIOError
from found_tts.corpus.builder import CorpusBuilder, build_corpus, inventory_for_manifest, target_voice
from found_tts.corpus.io import (
    MANIFEST_NAME, META_NAME, load_manifest, read_transcripts, read_wav, write_transcripts,
)
from found_tts.dsp.features import read_mel
from tests.fixtures.sample_configs import tiny_config_dict


class TestCorpusLayout:
    """Test the generated tiny corpus"""

    def test_record_counts(self, tiny_corpus):
        """Test target records plus clean and noisy auxiliary copies"""
        assert len(tiny_corpus.by_speaker("target")) == 10
        assert len(tiny_corpus.by_speaker("auxiliary")) == 12
        assert tiny_corpus.label_counts() == {'clean': 6, 'noisy': 16}

    def test_splits(self, tiny_corpus):
        """Test eval and dev splits come from the target speaker only"""
        eval_records = tiny_corpus.by_split(Split.EVAL)

        assert len(eval_records) == 3
        assert len(tiny_corpus.by_split(Split.DEV)) == 1
        assert {r.speaker for r in eval_records} == {"target"}
        assert tiny_corpus.validate(3) == []

    def test_target_records(self, tiny_corpus):
        """Test target records are noisy with a clean reference"""
        record = next(r for r in tiny_corpus.records if r.id == "target_00000")

        assert record.condition == NoiseCondition.NOISY
        assert record.snr_db == 4.0
        assert record.clean_mel_path is not None
        assert record.n_frames == sum(record.durations)

    def test_auxiliary_pairs(self, tiny_corpus):
        """Test auxiliary utterances come as clean and noisy copies of one rendering"""
        clean = next(r for r in tiny_corpus.records if r.id == "auxiliary_00000_clean")
        noisy = next(r for r in tiny_corpus.records if r.id == "auxiliary_00000_noisy")

        assert clean.condition == NoiseCondition.CLEAN
        assert noisy.condition == NoiseCondition.NOISY
        assert noisy.clean_wav_path == clean.wav_path
        assert clean.symbols == noisy.symbols
        assert clean.transcripts == {}

    def test_transcript_levels(self, tiny_corpus):
        """Test training records carry every CER level and eval records none"""
        for record in tiny_corpus.by_speaker("target"):
            if record.split == Split.EVAL:
                assert record.transcripts == {}
                assert record.transcript == record.symbols
            else:
                assert set(record.transcripts) == {"0.088", "0.233"}
                assert record.transcript == record.transcripts["0.233"]

    def test_corruption_summary(self, tiny_corpus):
        """Test the manifest records the achieved corpus CER per level"""
        corruption = tiny_corpus.config['corruption']

        assert set(corruption) == {"target@0.088", "target@0.233"}
        assert corruption["target@0.233"]['reference_symbols'] > 0
        assert 0.0 < corruption["target@0.233"]['achieved_cer'] < 1.0

    def test_files(self, tiny_corpus):
        """Test audio, mel and transcript files exist and agree"""
        record = tiny_corpus.records[0]
        mel = read_mel(tiny_corpus.resolve(record.mel_path))
        waveform, sample_rate = read_wav(tiny_corpus.resolve(record.wav_path))
        transcripts = read_transcripts(tiny_corpus.resolve(record.transcript_path))

        assert mel.n_frames == record.n_frames
        assert sample_rate == 16000
        assert np.max(np.abs(waveform)) <= 1.0
        assert transcripts['golden'] == record.symbols

    def test_load_manifest(self, tiny_corpus):
        """Test the manifest reloads from disk"""
        loaded = load_manifest(tiny_corpus.root)

        assert loaded.records == tiny_corpus.records
        assert loaded.seed == 0
        assert loaded.config['corpus']['eval_size'] == 3

    def test_inventory_rebuilt(self, tiny_corpus):
        """Test the inventory is recoverable from the manifest"""
        inventory = inventory_for_manifest(tiny_corpus)

        assert inventory.phonemes == [f"s{i}" for i in range(1, 7)]
        assert target_voice(tiny_corpus, inventory).f0 == 80.0


class TestCorpusBuilder:
    """Test builder behaviour on fresh directories"""

    def _tiny(self):
        return ConfigLoader.from_dict(tiny_config_dict(corpus={
            'speakers': [
                {'name': 'target', 'role': 'target', 'n_utterances': 5, 'snr_db': 4.0, 'cer': 0.233},
                {'name': 'auxiliary', 'role': 'auxiliary', 'n_utterances': 2},
            ],
            'eval_size': 2,
            'dev_size': 0,
        }))

    def test_deterministic(self, tmp_path):
        """Test the same seed writes the same corpus"""
        config = self._tiny()
        a = build_corpus(config, seed=3, out_dir=tmp_path / "a")
        b = build_corpus(config, seed=3, out_dir=tmp_path / "b")

        assert [r.to_dict() for r in a.records] == [r.to_dict() for r in b.records]
        np.testing.assert_array_equal(read_mel(a.resolve(a.records[0].mel_path)).frames,
                                      read_mel(b.resolve(b.records[0].mel_path)).frames)

    def test_clean_auxiliary_only(self, tmp_path):
        """Test an auxiliary speaker without noise has no noisy copy"""
        manifest = build_corpus(self._tiny(), seed=0, out_dir=tmp_path)

        assert [r.id for r in manifest.by_speaker("auxiliary")] == [
            "auxiliary_00000_clean", "auxiliary_00001_clean",
        ]

    def test_existing_corpus_needs_force(self, tmp_path):
        """Test an existing manifest is not overwritten without force"""
        config = self._tiny()
        build_corpus(config, seed=0, out_dir=tmp_path)

        with pytest.raises(CorpusIOError, match="--force"):
            CorpusBuilder(config).build(tmp_path, seed=0)
        rebuilt = CorpusBuilder(config).build(tmp_path, seed=1, force=True)
        assert rebuilt.seed == 1


class TestManifestFiles:
    """Test manifest and transcript file handling"""

    def test_missing_manifest(self, tmp_path):
        """Test loading from an empty directory"""
        with pytest.raises(CorpusIOError):
            load_manifest(tmp_path)

    def test_bad_version(self, tiny_corpus, tmp_path):
        """Test an unknown manifest version is rejected"""
        (tmp_path / MANIFEST_NAME).write_text((tiny_corpus.root / MANIFEST_NAME).read_text())
        meta = json.loads((tiny_corpus.root / META_NAME).read_text())
        meta['version'] = 99
        (tmp_path / META_NAME).write_text(json.dumps(meta))

        with pytest.raises(CorpusIOError, match="version"):
            load_manifest(tmp_path)

    def test_transcript_file(self, tmp_path):
        """Test golden and corrupted transcripts share one file"""
        path = write_transcripts({'golden': ["s1", "#", "s2"], '0.233': ["s1", "s3"]}, tmp_path / "t.txt")

        assert read_transcripts(path) == {'golden': ["s1", "#", "s2"], '0.233': ["s1", "s3"]}
