"""
found-tts: Complete Test Suite
==============================

Shared fixtures for the corpus, model, pipeline and command-line tests.

Test Structure:
tests/
├── __init__.py
├── conftest.py                    # Shared fixtures and configuration
├── fixtures/
│   ├── __init__.py
│   └── sample_configs.py          # Tiny corpus and model configurations
├── test_core/
│   ├── __init__.py
│   ├── test_config.py             # Test configuration system
│   ├── test_checkpoints.py        # Test checkpoint container and store
│   └── test_common.py             # Test shared data models
├── test_dsp/
│   ├── __init__.py
│   ├── test_features.py           # Test mel analysis and mel files
│   └── test_metrics.py            # Test SNR, Levenshtein, DTW, MCD
├── test_corpus/
│   ├── __init__.py
│   ├── test_inventory.py          # Test symbol inventory and rendering
│   ├── test_noise.py              # Test noise generators and mixing
│   ├── test_corruption.py         # Test transcript corruption
│   ├── test_matcher.py            # Test template matching decode
│   └── test_builder.py            # Test corpus generation and manifests
├── test_model/
│   ├── __init__.py
│   ├── test_gradients.py          # Test gradient primitives
│   ├── test_attention.py          # Test GMM and location-sensitive attention
│   ├── test_vq.py                 # Test quantizer and codebook diagnostics
│   ├── test_adversarial.py        # Test noise branch and classifier
│   ├── test_acoustic.py           # Test the acoustic model
│   ├── test_batching.py           # Test vocabulary and batches
│   └── test_losses.py             # Test loss composition
├── test_pipeline/
│   ├── __init__.py
│   ├── test_trainer.py            # Test training runs
│   ├── test_synthesizer.py        # Test synthesis and artifacts
│   ├── test_evaluator.py          # Test the metric battery
│   └── test_pipeline.py           # Test the experiment matrix
├── test_cli/
│   ├── __init__.py
│   ├── test_main.py               # Test the command line
│   └── test_selfcheck.py          # Test the self-check battery
└── integration/
    ├── __init__.py
    └── test_trends.py             # Directional trends on the toy corpus
"""

# ============================================================================
# tests/conftest.py - Shared Test Configuration and Fixtures
# ============================================================================

import numpy as np
import pytest
import torch

from found_tts.cli.selfcheck import micro_model_config
from found_tts.core.common import NoiseCondition
from found_tts.core.config import ConfigLoader, CorpusConfig
from found_tts.corpus.builder import build_corpus
from found_tts.corpus.inventory import SymbolInventory
from found_tts.model.batching import TrainingExample, collate
from found_tts.pipeline.trainer import Trainer
from tests.fixtures.sample_configs import tiny_config_dict


@pytest.fixture
def tiny_config():
    """Tiny corpus and model configuration."""
    return ConfigLoader.from_dict(tiny_config_dict())


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """A generated tiny corpus, shared by every test of the session."""
    config = ConfigLoader.from_dict(tiny_config_dict())
    return build_corpus(config, seed=0, out_dir=tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def trained_baseline(tmp_path_factory, tiny_corpus):
    """A baseline system trained for a few steps on the tiny corpus."""
    config = ConfigLoader.from_dict(tiny_config_dict())
    return Trainer(config, system_id="A").train(tiny_corpus, tmp_path_factory.mktemp("train_A"))


@pytest.fixture(scope="session")
def small_inventory():
    """Eight-symbol inventory with default features."""
    return SymbolInventory.build(CorpusConfig(n_symbols=8), seed=0)


@pytest.fixture
def micro_config():
    """Smallest model configuration (4 mel bands, no dropout)."""
    return micro_model_config("gmm")


@pytest.fixture
def micro_batch():
    """Two-utterance batch of 4-band frames with different lengths."""
    rng = np.random.default_rng(0)
    examples = [
        TrainingExample("a", [1, 2, 3, 4], rng.uniform(-1, 0, (5, 4)).astype(np.float32), 0,
                        NoiseCondition.CLEAN),
        TrainingExample("b", [2, 3, 4], rng.uniform(-1, 0, (3, 4)).astype(np.float32), 1,
                        NoiseCondition.NOISY),
    ]
    return collate(examples)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)
