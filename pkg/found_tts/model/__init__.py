"""
found-tts models: gradient primitives, text encoder, attention, the acoustic
decoder and its VQ and adversarial branches, batching and loss composition.
"""

from .gradients import (
    GradientReversal,
    StopGradient,
    finite_diff_check,
    gradient_reversal,
    parameter_function,
    stop_gradient,
    straight_through,
)
from .encoder import Prenet, TextEncoder
from .attention import (
    GMMAttention,
    GmmAttentionState,
    LocationSensitiveAttention,
    LsaAttentionState,
    attention_monotonicity,
    gmm_alignment,
)
from .vq import VQBranch, VqOutput, cluster_purity, codebook_health, quantize, vq_loss_terms
from .adversarial import AdversarialBranch, NoiseClassifier, adv_loss, noise_cross_entropy, sentence_pool
from .acoustic import AcousticModel, GeneratedFrames, ModelOutputs
from .batching import Batch, SymbolVocabulary, TrainingExample, collate, iterate_batches, load_training_examples
from .losses import LossTerms, compose_losses, masked_mel_loss, stop_token_loss

__all__ = [
    'GradientReversal',
    'StopGradient',
    'finite_diff_check',
    'gradient_reversal',
    'parameter_function',
    'stop_gradient',
    'straight_through',
    'Prenet',
    'TextEncoder',
    'GMMAttention',
    'GmmAttentionState',
    'LocationSensitiveAttention',
    'LsaAttentionState',
    'attention_monotonicity',
    'gmm_alignment',
    'VQBranch',
    'VqOutput',
    'cluster_purity',
    'codebook_health',
    'quantize',
    'vq_loss_terms',
    'AdversarialBranch',
    'NoiseClassifier',
    'adv_loss',
    'noise_cross_entropy',
    'sentence_pool',
    'AcousticModel',
    'GeneratedFrames',
    'ModelOutputs',
    'Batch',
    'SymbolVocabulary',
    'TrainingExample',
    'collate',
    'iterate_batches',
    'load_training_examples',
    'LossTerms',
    'compose_losses',
    'masked_mel_loss',
    'stop_token_loss',
]
