"""
found-tts: Common Data Models
=============================

Shared data structures used by the corpus generator, the feature and metric
kernels, the models and the train/evaluate pipeline. Every step imports from
this module so that records flow between steps without conversion.

Author: found-tts developers
Version: 0.1.0
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Any, Tuple
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
import json
import math
import time

import numpy as np

__all__ = [
    'NoiseKind',
    'NoiseCondition',
    'Split',
    'SpeakerRole',
    'AttentionKind',
    'TrainMode',
    'Granularity',
    'AudioSource',
    'MelSpectrogram',
    'AlignmentPath',
    'EditSummary',
    'GradCheckResult',
    'ToyUtterance',
    'UtteranceRecord',
    'CorpusManifest',
    'CodebookHealth',
    'ProbeReport',
    'SynthesisResult',
    'EvalReport',
    'CellResult',
    'RunContext',
    'PipelineStep',
    'MANIFEST_VERSION',
    'cer_level_key',
]

MANIFEST_VERSION = 1

# ============================================================================
# ENUMS
# ============================================================================

class NoiseKind(Enum):
    """Additive noise generators"""
    WHITE = "white"
    PINK = "pink"
    BABBLE = "babble"
    HUM = "hum"
    USER_FILE = "user_file"

class NoiseCondition(Enum):
    """Acoustic condition label of an utterance"""
    CLEAN = "clean"
    NOISY = "noisy"

    @property
    def label(self) -> int:
        """Class index used by the noise classifier (clean=0, noisy=1)"""
        return 0 if self is NoiseCondition.CLEAN else 1

class Split(Enum):
    TRAIN = "train"
    DEV = "dev"
    EVAL = "eval"

class SpeakerRole(Enum):
    TARGET = "target"
    AUXILIARY = "auxiliary"

class AttentionKind(Enum):
    GMM = "gmm"
    LSA = "lsa"

class TrainMode(Enum):
    """Which optional branches contribute to the model and the loss"""
    BASELINE = "baseline"
    VQ = "vq"
    ADVERSARIAL = "adversarial"
    BOTH = "both"

    @property
    def uses_vq(self) -> bool:
        return self in (TrainMode.VQ, TrainMode.BOTH)

    @property
    def uses_adversarial(self) -> bool:
        return self in (TrainMode.ADVERSARIAL, TrainMode.BOTH)

class Granularity(Enum):
    """Pooling level of the adversarial noise classifier"""
    FRAME = "frame"
    SENTENCE = "sentence"

class AudioSource(Enum):
    """Which rendering of a target utterance a system trains on"""
    CLEAN = "clean"
    NOISY = "noisy"


def cer_level_key(level: float) -> str:
    """Canonical manifest key for a transcript corruption level"""
    return f"{level:.3f}"

# ============================================================================
# FEATURES AND METRICS
# ============================================================================

@dataclass
class MelSpectrogram:
    """Log-amplitude mel frames, M x B"""
    frames: np.ndarray
    hop_ms: float = 12.5
    window_ms: float = 50.0
    sample_rate: int = 16000

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def n_bands(self) -> int:
        return int(self.frames.shape[1])

    def validate(self, n_bands: int = 80) -> bool:
        """Check the frame-matrix invariants"""
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            return False
        if self.frames.shape[1] != n_bands:
            return False
        return bool(np.all(np.isfinite(self.frames)))

@dataclass
class AlignmentPath:
    """Monotone DTW path of (i, j) index pairs"""
    pairs: List[Tuple[int, int]]

    def __len__(self) -> int:
        return len(self.pairs)

    def transposed(self) -> 'AlignmentPath':
        return AlignmentPath([(j, i) for i, j in self.pairs])

    def is_valid(self, len_a: int, len_b: int) -> bool:
        """Endpoints, step set and monotonicity"""
        if not self.pairs:
            return False
        if self.pairs[0] != (0, 0) or self.pairs[-1] != (len_a - 1, len_b - 1):
            return False
        for (i0, j0), (i1, j1) in zip(self.pairs, self.pairs[1:]):
            if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
                return False
        return True

@dataclass
class EditSummary:
    """Minimal edit script counts between a reference and a hypothesis"""
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int
    cer: float

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @staticmethod
    def rate(errors: int, reference_length: int) -> float:
        # empty reference: 0.0 when nothing was inserted, otherwise 1.0
        if reference_length == 0:
            return 0.0 if errors == 0 else 1.0
        return errors / reference_length

    @classmethod
    def merge(cls, summaries: List['EditSummary']) -> 'EditSummary':
        """Pool counts over many utterances (corpus-level rate)"""
        s = sum(x.substitutions for x in summaries)
        d = sum(x.deletions for x in summaries)
        i = sum(x.insertions for x in summaries)
        n = sum(x.reference_length for x in summaries)
        return cls(s, d, i, n, cls.rate(s + d + i, n))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

@dataclass
class GradCheckResult:
    """Outcome of a finite-difference gradient check"""
    max_abs_err: float
    max_rel_err: float
    probed_coordinates: int

    def passed(self, rel_tol: float = 1e-3) -> bool:
        return self.max_rel_err < rel_tol

# ============================================================================
# CORPUS
# ============================================================================

@dataclass
class ToyUtterance:
    """One synthetic utterance held in memory"""
    id: str
    speaker: str
    symbols: List[str]
    durations: List[int]
    waveform: np.ndarray
    sample_rate: int
    mel: MelSpectrogram
    noise_condition: NoiseCondition = NoiseCondition.CLEAN
    noise_kind: Optional[NoiseKind] = None
    snr_db: Optional[float] = None
    transcript: List[str] = field(default_factory=list)
    transcript_cer: float = 0.0

    def __post_init__(self):
        if not self.transcript:
            self.transcript = list(self.symbols)

@dataclass
class UtteranceRecord:
    """One manifest line"""
    id: str
    speaker: str
    split: Split
    condition: NoiseCondition
    symbols: List[str]
    durations: List[int]
    transcript: List[str]
    cer: float
    n_frames: int
    wav_path: str
    mel_path: str
    transcript_path: str
    noise_kind: Optional[NoiseKind] = None
    snr_db: Optional[float] = None
    gain: float = 1.0
    clean_wav_path: Optional[str] = None
    clean_mel_path: Optional[str] = None
    transcripts: Dict[str, List[str]] = field(default_factory=dict)

    def transcript_at(self, level: Optional[float]) -> List[str]:
        """Training text at a corruption level; 0 or None means golden"""
        if not level:
            return list(self.symbols)
        key = cer_level_key(level)
        if key not in self.transcripts:
            raise KeyError(f"Utterance {self.id} has no transcript at CER level {key}")
        return list(self.transcripts[key])

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['split'] = self.split.value
        data['condition'] = self.condition.value
        data['noise_kind'] = self.noise_kind.value if self.noise_kind else None
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'UtteranceRecord':
        data = dict(data)
        data['split'] = Split(data['split'])
        data['condition'] = NoiseCondition(data['condition'])
        if data.get('noise_kind'):
            data['noise_kind'] = NoiseKind(data['noise_kind'])
        return cls(**data)

@dataclass
class CorpusManifest:
    """Index of a generated corpus"""
    version: int
    seed: int
    records: List[UtteranceRecord]
    root: Optional[Path] = None
    config: Dict[str, Any] = field(default_factory=dict)

    def by_split(self, split: Split) -> List[UtteranceRecord]:
        return [r for r in self.records if r.split == split]

    def by_speaker(self, speaker: str) -> List[UtteranceRecord]:
        return [r for r in self.records if r.speaker == speaker]

    def speakers(self) -> List[str]:
        seen: List[str] = []
        for r in self.records:
            if r.speaker not in seen:
                seen.append(r.speaker)
        return seen

    def label_counts(self) -> Dict[str, int]:
        counts = {c.value: 0 for c in NoiseCondition}
        for r in self.records:
            counts[r.condition.value] += 1
        return counts

    def resolve(self, relative: str) -> Path:
        """Absolute path of a file referenced by a record"""
        if self.root is None:
            return Path(relative)
        return Path(self.root) / relative

    def validate(self, eval_size: Optional[int] = None) -> List[str]:
        """Return a list of violated invariants (empty when valid)"""
        problems = []
        ids = [r.id for r in self.records]
        if len(ids) != len(set(ids)):
            problems.append("utterance ids are not unique")
        train_ids = {r.id for r in self.by_split(Split.TRAIN)}
        eval_ids = {r.id for r in self.by_split(Split.EVAL)}
        if train_ids & eval_ids:
            problems.append("eval split overlaps train split")
        if eval_size is not None and len(eval_ids) != eval_size:
            problems.append(f"eval split has {len(eval_ids)} utterances, expected {eval_size}")
        return problems

# ============================================================================
# MODEL DIAGNOSTICS
# ============================================================================

@dataclass
class CodebookHealth:
    perplexity: float
    dead_entry_count: int
    total_assignments: int

@dataclass
class ProbeReport:
    """Noise-detectability probe on frozen latent features"""
    accuracy: float
    confusion: List[List[int]]
    n_train: int
    n_test: int
    granularity: str

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

@dataclass
class SynthesisResult:
    """Autoregressive generation output for one symbol sequence"""
    mel: MelSpectrogram
    alignments: np.ndarray
    stop_step: int
    truncated: bool
    codebook_indices: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

# ============================================================================
# EVALUATION
# ============================================================================

@dataclass
class EvalReport:
    """Metric battery for one trained system on the reserved eval split"""
    system_id: str
    corpus_cer: float
    mcd_mean: float
    cger: EditSummary
    attention_monotonicity: float
    truncation_rate: float
    n_utterances: int
    noise_probe_accuracy: Optional[float] = None
    mcd_noisy_mean: Optional[float] = None
    codebook_perplexity: Optional[float] = None
    cluster_purity: Optional[float] = None

    @property
    def cger_rate(self) -> float:
        return self.cger.cer

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key, value in list(data.items()):
            if isinstance(value, float) and not math.isfinite(value):
                data[key] = None
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EvalReport':
        data = dict(data)
        data['cger'] = EditSummary(**data['cger'])
        return cls(**data)

@dataclass
class CellResult:
    """Outcome of one experiment-matrix cell"""
    name: str
    success: bool
    report: Optional[EvalReport] = None
    checkpoint: Optional[str] = None
    error_message: Optional[str] = None
    elapsed_seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'success': self.success,
            'report': self.report.to_dict() if self.report else None,
            'checkpoint': self.checkpoint,
            'error_message': self.error_message,
            'elapsed_seconds': self.elapsed_seconds,
        }

# ============================================================================
# PIPELINE CONTEXT
# ============================================================================

@dataclass
class RunContext:
    """Context passed through corpus, train and evaluation steps"""
    output_dir: Path
    seed: int = 0
    debug_mode: bool = False
    start_time: float = field(default_factory=lambda: time.perf_counter())
    metadata: Dict[str, Any] = field(default_factory=dict)

    def get_elapsed_time(self) -> float:
        """Get elapsed time since the run started"""
        return time.perf_counter() - self.start_time

# ============================================================================
# ABSTRACT BASE CLASSES
# ============================================================================

class PipelineStep(ABC):
    """Abstract base class for corpus, training and evaluation steps"""

    def __init__(self, config: Any = None):
        self.config = config
        self.step_name = self.__class__.__name__

    @abstractmethod
    def run(self, input_data: Any, context: RunContext) -> Any:
        """Run the step and return output for the next one"""
        pass

    def get_step_metadata(self) -> Dict[str, Any]:
        """Get metadata about this step"""
        return {
            'step_name': self.step_name,
            'version': '0.1.0',
        }
