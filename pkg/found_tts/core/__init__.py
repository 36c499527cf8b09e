"""
found-tts core infrastructure: configuration, checkpoints, shared data models
and error types.
"""

from .errors import (
    FoundTTSError,
    CheckFailure,
    ConfigError,
    CorpusIOError,
    CheckpointIntegrityError,
    CheckpointMismatchError,
    TrainingDivergedError,
    GradCheckError,
)
from .config import (
    FeatureConfig,
    SpeakerConfig,
    CorpusConfig,
    ModelConfig,
    TrainConfig,
    EvalConfig,
    FoundTTSConfig,
    ConfigLoader,
    save_config,
)
from .checkpoints import Checkpoint, CheckpointStore, read_checkpoint, write_checkpoint

__all__ = [
    'FoundTTSError',
    'CheckFailure',
    'ConfigError',
    'CorpusIOError',
    'CheckpointIntegrityError',
    'CheckpointMismatchError',
    'TrainingDivergedError',
    'GradCheckError',
    'FeatureConfig',
    'SpeakerConfig',
    'CorpusConfig',
    'ModelConfig',
    'TrainConfig',
    'EvalConfig',
    'FoundTTSConfig',
    'ConfigLoader',
    'save_config',
    'Checkpoint',
    'CheckpointStore',
    'read_checkpoint',
    'write_checkpoint',
]
