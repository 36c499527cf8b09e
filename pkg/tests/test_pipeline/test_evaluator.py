# ============================================================================
# tests/test_pipeline/test_evaluator.py
# ============================================================================

"""
Tests for the Evaluation Battery
================================
"""

import dataclasses
import json

import pytest
import torch

from found_tts.core.checkpoints import read_checkpoint
from found_tts.core.common import RunContext, Split
from found_tts.core.config import ConfigLoader, EvalConfig
from found_tts.core.errors import CheckpointMismatchError, ConfigError, CorpusIOError
from found_tts.pipeline.evaluator import (
    REPORT_NAME, Evaluator, NoiseProbe, eval_records, frame_labels, rescore_from_artifacts,
)
from found_tts.pipeline.synthesizer import SYNTHESIS_INDEX
from tests.fixtures.sample_configs import tiny_config_dict


@pytest.fixture(scope="module")
def tiny_eval_config():
    return ConfigLoader.from_dict(tiny_config_dict())


@pytest.fixture(scope="module")
def evaluated(trained_baseline, tiny_corpus, tiny_eval_config, tmp_path_factory):
    """Report and output directory of one evaluation of the baseline"""
    out = tmp_path_factory.mktemp("eval_A")
    report = Evaluator(tiny_eval_config).evaluate(trained_baseline.checkpoint, tiny_corpus, out)
    return report, out


class TestHelpers:
    """Test label expansion and eval record selection"""

    def test_frame_labels(self):
        """Test durations expand to per-frame labels, clipped or padded"""
        assert frame_labels(["a", "b"], [2, 1]) == ["a", "a", "b"]
        assert frame_labels(["a", "b"], [2, 1], n_frames=2) == ["a", "a"]
        assert frame_labels(["a", "b"], [2, 1], n_frames=5) == ["a", "a", "b", "b", "b"]

    def test_eval_records(self, tiny_corpus):
        """Test only target eval utterances are scored"""
        records = eval_records(tiny_corpus)

        assert len(records) == 3
        assert all(r.split == Split.EVAL and r.speaker == "target" for r in records)
        assert len(eval_records(tiny_corpus, limit=2)) == 2

    def test_eval_records_empty(self, tiny_corpus):
        """Test a corpus without an eval split"""
        emptied = dataclasses.replace(
            tiny_corpus, records=[r for r in tiny_corpus.records if r.split != Split.EVAL]
        )

        with pytest.raises(ConfigError, match="no eval"):
            eval_records(emptied)


class TestEvaluate:
    """Test the full battery on the baseline"""

    def test_report(self, evaluated):
        """Test every metric of a baseline system is present"""
        report, _ = evaluated

        assert report.system_id == "A"
        assert report.n_utterances == 3
        assert report.corpus_cer == 0.0
        assert report.mcd_mean > 0
        assert report.mcd_noisy_mean is not None
        assert 0.0 <= report.cger_rate
        assert 0.0 <= report.attention_monotonicity <= 1.0
        assert 0.0 <= report.truncation_rate <= 1.0
        assert 0.0 <= report.noise_probe_accuracy <= 1.0
        assert report.codebook_perplexity is None
        assert report.cluster_purity is None

    def test_artifacts(self, evaluated):
        """Test the report and per-utterance synthesis files are written"""
        report, out = evaluated
        payload = json.loads((out / REPORT_NAME).read_text(encoding='utf-8'))

        assert payload['system_id'] == report.system_id
        assert payload['noise_probe']['granularity'] == "frame"
        assert len((out / "synth" / SYNTHESIS_INDEX).read_text(encoding='utf-8').splitlines()) == 3

    def test_rescore_matches(self, evaluated, tiny_corpus, tiny_eval_config):
        """Test everything but the probe is recomputable from the artifacts"""
        report, out = evaluated
        rescored = rescore_from_artifacts(out / "synth", tiny_corpus, tiny_eval_config.eval)

        assert rescored.system_id == report.system_id
        assert rescored.mcd_mean == pytest.approx(report.mcd_mean)
        assert rescored.mcd_noisy_mean == pytest.approx(report.mcd_noisy_mean)
        assert rescored.cger == report.cger
        assert rescored.attention_monotonicity == pytest.approx(report.attention_monotonicity)
        assert rescored.truncation_rate == report.truncation_rate
        assert rescored.noise_probe_accuracy is None

    def test_rescore_empty_directory(self, tiny_corpus, tmp_path):
        """Test rescoring without artifacts"""
        with pytest.raises(CorpusIOError):
            rescore_from_artifacts(tmp_path, tiny_corpus)

    def test_without_probe(self, trained_baseline, tiny_corpus, tiny_eval_config):
        """Test the probe can be skipped and nothing is written without an output directory"""
        report = Evaluator(tiny_eval_config).evaluate(trained_baseline.checkpoint, tiny_corpus, probe=False)

        assert report.noise_probe_accuracy is None
        assert report.n_utterances == 3


class TestCompatibility:
    """Test checkpoint/corpus mismatches"""

    def test_other_corpus_seed(self, trained_baseline, tiny_corpus):
        """Test a checkpoint trained on another corpus"""
        other = dataclasses.replace(tiny_corpus, seed=tiny_corpus.seed + 1)

        with pytest.raises(CheckpointMismatchError, match="seed"):
            Evaluator.check_compatible(read_checkpoint(trained_baseline.checkpoint), other)

    def test_other_vocabulary(self, trained_baseline, tiny_corpus):
        """Test a checkpoint whose vocabulary differs from the corpus inventory"""
        checkpoint = read_checkpoint(trained_baseline.checkpoint)
        checkpoint.extra['vocab'] = checkpoint.extra['vocab'][:-1]

        with pytest.raises(CheckpointMismatchError, match="vocabulary"):
            Evaluator.check_compatible(checkpoint, tiny_corpus)

    def test_run_needs_checkpoint(self, tiny_corpus, tmp_path):
        """Test the pipeline-step entry point requires a checkpoint"""
        with pytest.raises(ConfigError, match="checkpoint"):
            Evaluator().run(tiny_corpus, RunContext(output_dir=tmp_path))


class TestNoiseProbe:
    """Test the detectability probe on synthetic features"""

    def test_separable_features(self):
        """Test perfectly separable features are classified"""
        generator = torch.Generator().manual_seed(0)
        x = torch.randn(40, 3, generator=generator)
        y = torch.arange(40) % 2
        x[:, 0] += y.float() * 10.0
        probe = NoiseProbe(EvalConfig(probe_epochs=100), seed=0)

        report = probe.fit(x[:20], y[:20], x[20:], y[20:], "frame")

        assert report.accuracy == 1.0
        assert report.confusion == [[10, 0], [0, 10]]
        assert (report.n_train, report.n_test) == (20, 20)
