# ============================================================================
# found_tts/core/errors.py
# ============================================================================

"""
Error Types
===========

Exception hierarchy shared by the library and the command line. Every error
carries the process exit code the CLI reports for it.
"""

__all__ = [
    'FoundTTSError',
    'CheckFailure',
    'ConfigError',
    'CorpusIOError',
    'CheckpointIntegrityError',
    'CheckpointMismatchError',
    'TrainingDivergedError',
    'GradCheckError',
]


class FoundTTSError(Exception):
    """Base class for all found-tts errors"""
    exit_code = 1


class CheckFailure(FoundTTSError):
    """A self-check or acceptance check did not pass"""
    exit_code = 1


class ConfigError(FoundTTSError, ValueError):
    """Invalid or inconsistent configuration"""
    exit_code = 2


class CorpusIOError(FoundTTSError, OSError):
    """Corpus or artifact files could not be read or written"""
    exit_code = 3


class CheckpointIntegrityError(FoundTTSError):
    """Checkpoint file is truncated, altered or not a checkpoint"""
    exit_code = 4


class CheckpointMismatchError(FoundTTSError):
    """Checkpoint does not fit the corpus or configuration it is used with"""
    exit_code = 4


class TrainingDivergedError(FoundTTSError):
    """Loss became non-finite; carries the last good checkpoint path"""
    exit_code = 1

    def __init__(self, message: str, last_checkpoint=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


class GradCheckError(FoundTTSError, ValueError):
    """Finite-difference evaluation produced a non-finite value"""
    exit_code = 1
