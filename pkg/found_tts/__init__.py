# ============================================================================
# found_tts/__init__.py
# ============================================================================

"""
found-tts: Sequence-to-Sequence TTS on Imperfect Found Data
===========================================================

A toy-scale workbench for training attention-based text-to-mel models on
corpora with noisy audio and erroneous transcripts.

Main Components:
- Corpus: synthetic pseudo-phoneme corpus with controlled noise and transcript errors
- DSP: mel analysis, SNR, Levenshtein, DTW and MCD kernels
- Model: seq2seq core with VQ and adversarial noise branches
- Pipeline: training, synthesis, evaluation and the experiment matrix

Example Usage:
    from found_tts import ConfigLoader, build_corpus, Trainer, Evaluator

    config = ConfigLoader.load("configs/toy.yaml")
    manifest = build_corpus(config, seed=0, out_dir="runs/corpus")
    trained = Trainer(config, system_id="A").train(manifest, "runs/A")
    report = Evaluator(config).evaluate(trained.checkpoint, manifest, "runs/A/eval")
"""

try:
    from .core import ConfigLoader, FoundTTSConfig
    from .corpus import build_corpus, load_manifest
    from .pipeline import Evaluator, ExperimentPipeline, Synthesizer, Trainer

    __all__ = [
        'ConfigLoader',
        'FoundTTSConfig',
        'build_corpus',
        'load_manifest',
        'Trainer',
        'Synthesizer',
        'Evaluator',
        'ExperimentPipeline',
    ]
except ImportError:
    # Handle case where dependencies aren't installed yet
    __all__ = []

__version__ = "0.1.0"
__author__ = "found-tts developers"
__description__ = "Sequence-to-sequence TTS on imperfect found data"
