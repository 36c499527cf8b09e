# ============================================================================
# tests/test_pipeline/test_pipeline.py
# ============================================================================

"""
Tests for the Experiment Matrix
===============================
"""

import json

import pytest

from found_tts.core.common import AttentionKind, AudioSource, CellResult, EditSummary, EvalReport, Granularity, \
    TrainMode
from found_tts.core.config import ConfigLoader
from found_tts.pipeline.pipeline import CELLS, ExperimentPipeline, cell_config, comparison_table, format_table
from tests.fixtures.sample_configs import tiny_config_dict


def _report(system_id: str, mcd: float) -> EvalReport:
    return EvalReport(
        system_id=system_id, corpus_cer=0.233, mcd_mean=mcd,
        cger=EditSummary(1, 0, 0, 10, 0.1), attention_monotonicity=0.9, truncation_rate=0.0, n_utterances=3,
    )


class TestCells:
    """Test the named system grid"""

    def test_grid(self):
        """Test every system of the comparison is defined"""
        assert set(CELLS) == {
            "A", "B", "C", "D", "E", "F", "G", "H", "VQVAE_A", "VQVAE_D", "ADV_SEN", "ADV_FRAME",
            "ADV_FRAME_NOGRL", "ADV_FRAME_B010", "ADV_FRAME_B025", "ADV_FRAME_B100",
        }
        assert CELLS["F"].manifest == "snr8"
        assert all(cell_spec.manifest == "default" for name, cell_spec in CELLS.items() if name != "F")

    def test_cell_config(self, tiny_config):
        """Test cell overrides land on top of the base config"""
        d = cell_config(tiny_config, CELLS["D"])
        e = cell_config(tiny_config, CELLS["E"])
        h = cell_config(tiny_config, CELLS["H"])
        sentence = cell_config(tiny_config, CELLS["ADV_SEN"])
        no_grl = cell_config(tiny_config, CELLS["ADV_FRAME_NOGRL"])

        assert d.train.cer_level == 0.233 and d.train.audio_source == AudioSource.CLEAN
        assert e.model.attention == AttentionKind.LSA
        assert h.train.audio_source == AudioSource.NOISY
        assert sentence.train.mode == TrainMode.ADVERSARIAL and sentence.train.use_auxiliary
        assert sentence.model.granularity == Granularity.SENTENCE
        assert no_grl.train.beta == 0.0
        assert d.train.max_steps == tiny_config.train.max_steps
        assert d.model.encoder_dim == 16


class TestComparisonTable:
    """Test the comparison outputs"""

    def test_format_table(self):
        """Test successful rows carry metrics and failures carry their error"""
        results = [
            CellResult("A", True, report=_report("A", 7.25)),
            CellResult("F", False, error_message="ConfigError: needs snr8"),
        ]
        text = format_table(results)
        lines = text.splitlines()

        assert lines[0].split()[:3] == ["system", "corpus_cer", "mcd"]
        assert lines[2].split()[:3] == ["A", "0.233", "7.250"]
        assert lines[3].split()[:2] == ["F", "FAILED"]
        assert "F: ConfigError: needs snr8" in text

    def test_comparison_table(self):
        """Test the JSON table lists columns and cells"""
        table = comparison_table([CellResult("A", True, report=_report("A", 7.0))])

        assert table['columns'][0] == "system"
        assert table['cells'][0]['report']['mcd_mean'] == 7.0


class TestExperimentPipeline:
    """Test concurrent cell execution"""

    @pytest.fixture
    def pipeline(self, tiny_corpus, tmp_path):
        config = ConfigLoader.from_dict(tiny_config_dict())
        pipeline = ExperimentPipeline(config, tiny_corpus.root, tmp_path / "matrix")
        yield pipeline
        pipeline.close()

    @pytest.mark.asyncio
    async def test_unknown_cell(self, pipeline):
        """Test an unknown cell comes back as a failed result"""
        result = await pipeline.process("Z")

        assert not result.success
        assert "Unknown matrix cell" in result.error_message

    @pytest.mark.asyncio
    async def test_missing_manifest_override(self, pipeline):
        """Test cell F without the 8 dB corpus fails without stopping the run"""
        result = await pipeline.process("F")

        assert not result.success
        assert "snr8" in result.error_message

    @pytest.mark.asyncio
    async def test_batch_processing(self, pipeline):
        """Test a batch trains, evaluates and reports in order"""
        results = await pipeline.process_batch(["A", "Z"])

        assert [r.name for r in results] == ["A", "Z"]
        assert results[0].success, results[0].error_message
        assert results[0].report.system_id == "A"
        assert results[0].report.n_utterances == 3
        assert results[0].checkpoint.endswith(".ftts")
        assert not results[1].success
        assert (pipeline.output_dir / "A" / "effective_config.yaml").exists()

        paths = pipeline.write_comparison(results)
        payload = json.loads(paths['json'].read_text(encoding='utf-8'))
        assert [cell['name'] for cell in payload['cells']] == ["A", "Z"]
        assert "FAILED" in paths['text'].read_text(encoding='utf-8')

    @pytest.mark.asyncio
    async def test_health_check(self, pipeline, tmp_path):
        """Test corpus loading is reported per manifest key"""
        healthy = await pipeline.health_check()
        assert healthy['status'] == 'healthy'
        assert healthy['manifests']['default']['records'] == 22

        pipeline.manifests['snr8'] = str(tmp_path / "missing")
        degraded = await pipeline.health_check()
        assert degraded['status'] == 'degraded'
        assert degraded['manifests']['snr8']['status'] == 'unhealthy'

    def test_pipeline_info(self, pipeline):
        """Test pipeline information"""
        info = pipeline.get_pipeline_info()

        assert info['workers'] == 1
        assert set(info['cells']) == set(CELLS)
        assert 'default' in info['manifests']
