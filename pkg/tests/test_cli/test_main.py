# ============================================================================
# tests/test_cli/test_main.py
# ============================================================================

"""
Tests for the Command Line
==========================
"""

import json

import pytest

from found_tts.cli.main import _parse_set, build_parser, load_config, main
from found_tts.core.common import AttentionKind, TrainMode
from found_tts.core.config import ConfigLoader, save_config
from found_tts.core.errors import ConfigError
from tests.fixtures.sample_configs import tiny_config_dict


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    save_config(ConfigLoader.from_dict(tiny_config_dict()), path)
    return str(path)


def _summary(capsys):
    return json.loads(capsys.readouterr().out)


class TestConfigLayering:
    """Test how flags become config overrides"""

    def test_parse_set(self):
        """Test dotted keys become nested values parsed as YAML scalars"""
        overrides = _parse_set(["train.beta=0.5", "model.attention=lsa", "eval.cells=[A, D]"])

        assert overrides == {'train': {'beta': 0.5}, 'model': {'attention': 'lsa'}, 'eval': {'cells': ['A', 'D']}}

    def test_parse_set_errors(self):
        """Test malformed --set values"""
        with pytest.raises(ConfigError):
            _parse_set(["train.beta"])
        with pytest.raises(ConfigError):
            _parse_set(["=1"])

    def test_flag_precedence(self, config_file):
        """Test dedicated flags beat --set, which beats the cell"""
        args = build_parser().parse_args([
            "train", "--config", config_file, "--corpus", "c", "--out", "o", "--cell", "E",
            "--set", "train.cer_level=0.088", "--beta", "0.75", "--seed", "9",
        ])
        config = load_config(args)

        assert config.model.attention == AttentionKind.LSA
        assert config.train.cer_level == 0.088
        assert config.train.beta == 0.75
        assert config.train.seed == 9
        assert config.train.mode == TrainMode.BASELINE
        assert config.model.encoder_dim == 16

    def test_unknown_cell(self, config_file):
        """Test an unknown cell name is a config error"""
        args = build_parser().parse_args(["train", "--config", config_file, "--corpus", "c", "--out", "o",
                                          "--cell", "Q"])
        with pytest.raises(ConfigError, match="unknown cell"):
            load_config(args)


class TestCommands:
    """Test the subcommands end to end on the tiny corpus"""

    def test_gen_corpus(self, config_file, tmp_path, capsys):
        """Test corpus generation prints a summary and keeps the effective config"""
        out = tmp_path / "corpus"

        assert main(["gen-corpus", "--config", config_file, "--out", str(out), "--seed", "0"]) == 0
        summary = _summary(capsys)

        assert summary['records'] == 22
        assert summary['labels'] == {'clean': 6, 'noisy': 16}
        assert (out / "effective_config.yaml").exists()
        assert main(["gen-corpus", "--config", config_file, "--out", str(out)]) == 3

    def test_train(self, config_file, tiny_corpus, tmp_path, capsys):
        """Test training a named cell with a step override"""
        out = tmp_path / "run"
        code = main(["train", "--config", config_file, "--corpus", str(tiny_corpus.root), "--out", str(out),
                     "--cell", "D", "--max-steps", "2"])

        assert code == 0
        summary = _summary(capsys)
        assert summary['system_id'] == "D"
        assert summary['steps'] == 2
        effective = ConfigLoader.from_yaml(out / "effective_config.yaml")
        assert effective.train.cer_level == 0.233
        assert main(["train", "--config", config_file, "--corpus", str(tiny_corpus.root),
                     "--out", str(out)]) == 3

    def test_synth(self, config_file, trained_baseline, tiny_corpus, tmp_path, capsys):
        """Test synthesis writes a mel and decodes it against the corpus"""
        out = tmp_path / "out.mel"
        code = main(["synth", "--config", config_file, "--checkpoint", str(trained_baseline.checkpoint),
                     "--text", "s1 s2 s3", "--corpus", str(tiny_corpus.root), "--out", str(out)])

        assert code == 0
        summary = _summary(capsys)
        assert out.exists()
        assert summary['frames'] >= 1
        assert isinstance(summary['decoded'], list)

    def test_synth_unknown_symbol(self, config_file, trained_baseline, tmp_path):
        """Test an out-of-vocabulary symbol exits with the config error code"""
        code = main(["synth", "--config", config_file, "--checkpoint", str(trained_baseline.checkpoint),
                     "--text", "s1 zz", "--out", str(tmp_path / "x.mel")])

        assert code == 2

    def test_eval_and_rescore(self, config_file, trained_baseline, tiny_corpus, tmp_path, capsys):
        """Test evaluation and recomputing its report from the artifacts"""
        out = tmp_path / "eval"
        assert main(["eval", "--config", config_file, "--corpus", str(tiny_corpus.root),
                     "--checkpoint", str(trained_baseline.checkpoint), "--out", str(out), "--no-probe"]) == 0
        report = _summary(capsys)

        assert main(["eval", "--config", config_file, "--corpus", str(tiny_corpus.root),
                     "--rescore", str(out / "synth")]) == 0
        rescored = _summary(capsys)

        assert report['n_utterances'] == 3
        assert rescored['mcd_mean'] == pytest.approx(report['mcd_mean'])
        assert rescored['cger'] == report['cger']

    def test_eval_needs_checkpoint(self, config_file, tiny_corpus, tmp_path):
        """Test eval without a checkpoint or artifacts"""
        assert main(["eval", "--config", config_file, "--corpus", str(tiny_corpus.root),
                     "--out", str(tmp_path / "e")]) == 2

    def test_missing_corpus(self, config_file, tmp_path):
        """Test a missing corpus exits with the I/O error code"""
        assert main(["train", "--config", config_file, "--corpus", str(tmp_path / "nothing"),
                     "--out", str(tmp_path / "run")]) == 3

    def test_bad_config_value(self):
        """Test an invalid --set value exits with the config error code"""
        assert main(["selfcheck", "--set", "train.batch_size=0"]) == 2
