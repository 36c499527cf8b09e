# ============================================================================
# found_tts/core/config.py
# ============================================================================

"""
Configuration Management
========================

Configuration system for found-tts runs with support for YAML, JSON and
environment variables. Sections are pydantic models that reject unknown keys,
so a typo in a config file fails loudly with the offending key named.

Layering, lowest to highest priority: defaults, config file, environment,
command-line flags.
"""

import os
import json
from pathlib import Path
from typing import Dict, List, Optional, Any, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .common import (
    AttentionKind, AudioSource, Granularity, NoiseKind, SpeakerRole, TrainMode,
)
from .errors import ConfigError

__all__ = [
    'FeatureConfig',
    'SpeakerConfig',
    'CorpusConfig',
    'ModelConfig',
    'TrainConfig',
    'EvalConfig',
    'FoundTTSConfig',
    'ConfigLoader',
    'save_config',
    'deep_merge',
    'ENV_PREFIX',
]

ENV_PREFIX = "FOUND_TTS_"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False, validate_assignment=True)


class FeatureConfig(_Section):
    """Mel analysis settings"""
    sample_rate: int = Field(16000, gt=0)
    window_ms: float = Field(50.0, gt=0)
    hop_ms: float = Field(12.5, gt=0)
    fft_size: int = Field(1024, gt=0)
    n_mels: int = Field(80, gt=0)
    mel_fmin: float = Field(40.0, ge=0)
    mel_fmax: float = Field(7600.0, gt=0)
    log_floor: float = Field(1e-5, gt=0)

    @property
    def hop_length(self) -> int:
        return int(round(self.sample_rate * self.hop_ms / 1000.0))

    @property
    def win_length(self) -> int:
        return int(round(self.sample_rate * self.window_ms / 1000.0))

    @model_validator(mode="after")
    def _check_geometry(self) -> 'FeatureConfig':
        if self.win_length > self.fft_size:
            raise ValueError("window longer than fft_size")
        if self.hop_length > self.win_length:
            raise ValueError("hop longer than window")
        if self.mel_fmax > self.sample_rate / 2 or self.mel_fmin >= self.mel_fmax:
            raise ValueError("mel band edges outside (0, sample_rate/2)")
        return self


class SpeakerConfig(_Section):
    """One speaker of the generated corpus"""
    name: str
    role: SpeakerRole = SpeakerRole.TARGET
    n_utterances: int = Field(2000, ge=1)
    snr_db: Optional[float] = None  # None: clean recordings
    noise_kinds: List[NoiseKind] = Field(
        default_factory=lambda: [NoiseKind.WHITE, NoiseKind.PINK, NoiseKind.BABBLE, NoiseKind.HUM]
    )
    cer: float = Field(0.0, ge=0.0, lt=1.0)
    extra_cer_levels: List[float] = Field(default_factory=list)
    noisy_copy: bool = False
    f0_scale: float = Field(1.0, gt=0)
    formant_scale: float = Field(1.0, gt=0)

    @field_validator('extra_cer_levels')
    @classmethod
    def _check_levels(cls, levels: List[float]) -> List[float]:
        for level in levels:
            if not 0.0 <= level < 1.0:
                raise ValueError(f"CER level {level} outside [0, 1)")
        return levels

    def cer_levels(self) -> List[float]:
        """Every non-zero corruption level this speaker is emitted at"""
        levels = [self.cer] + list(self.extra_cer_levels)
        return sorted({level for level in levels if level > 0})


def _default_speakers() -> List[SpeakerConfig]:
    return [
        SpeakerConfig(
            name="target", role=SpeakerRole.TARGET, n_utterances=2000,
            snr_db=4.0, cer=0.233, extra_cer_levels=[0.088, 0.117],
        ),
        SpeakerConfig(
            name="auxiliary", role=SpeakerRole.AUXILIARY, n_utterances=2000,
            snr_db=4.0, cer=0.0, noisy_copy=True, f0_scale=1.3, formant_scale=1.08,
        ),
    ]


class CorpusConfig(_Section):
    """Synthetic corpus generation"""
    n_symbols: int = Field(24, ge=2)
    min_symbols: int = Field(8, ge=1)
    max_symbols: int = Field(40, ge=1)
    min_duration: int = Field(5, ge=1)
    max_duration: int = Field(20, ge=1)
    base_f0: float = Field(80.0, gt=0)
    template_similarity_max: float = Field(0.9, gt=0, le=1.0)
    speakers: List[SpeakerConfig] = Field(default_factory=_default_speakers)
    eval_size: int = Field(400, ge=0)
    dev_size: int = Field(100, ge=0)
    corruption_mix: List[float] = Field(default_factory=lambda: [0.5, 0.3, 0.2])
    drop_boundaries: bool = False
    user_noise_file: Optional[str] = None
    workers: int = Field(1, ge=1)

    @field_validator('corruption_mix')
    @classmethod
    def _check_mix(cls, mix: List[float]) -> List[float]:
        if len(mix) != 3 or any(p < 0 for p in mix) or abs(sum(mix) - 1.0) > 1e-6:
            raise ValueError("corruption_mix must be three non-negative weights summing to 1")
        return mix

    @model_validator(mode="after")
    def _check_speakers(self) -> 'CorpusConfig':
        if self.min_symbols > self.max_symbols:
            raise ValueError("min_symbols exceeds max_symbols")
        if self.min_duration > self.max_duration:
            raise ValueError("min_duration exceeds max_duration")
        names = [s.name for s in self.speakers]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate speaker ids: {names}")
        if len(self.speakers) < 2:
            raise ValueError("corpus needs a target and at least one auxiliary speaker")
        targets = [s for s in self.speakers if s.role == SpeakerRole.TARGET]
        if len(targets) != 1:
            raise ValueError("exactly one target speaker required")
        if self.eval_size + self.dev_size >= targets[0].n_utterances:
            raise ValueError("eval_size + dev_size leaves no target training utterances")
        return self

    @property
    def target(self) -> SpeakerConfig:
        return next(s for s in self.speakers if s.role == SpeakerRole.TARGET)


class ModelConfig(_Section):
    """Acoustic model architecture"""
    n_mels: int = Field(80, gt=0)
    embedding_dim: int = 256
    encoder_prenet_dims: List[int] = Field(default_factory=lambda: [256, 256, 128])
    conv_bank_size: int = Field(8, ge=1)
    conv_channels: int = 128
    highway_layers: int = Field(4, ge=0)
    encoder_dim: int = 256
    decoder_prenet_dims: List[int] = Field(default_factory=lambda: [256, 256])
    prenet_dropout: float = Field(0.5, ge=0.0, lt=1.0)
    attention: AttentionKind = AttentionKind.GMM
    attention_rnn_dim: int = 256
    decoder_rnn_dim: int = 256
    gmm_mixtures: int = Field(5, ge=1)
    gmm_min_scale: float = Field(1e-2, gt=0)
    attention_dim: int = 128
    location_filters: int = 32
    location_kernel: int = 31
    n_speakers: int = Field(2, ge=1)
    speaker_embedding_dim: int = 32
    noise_embedding_dim: int = 16
    codebook_size: int = Field(256, ge=1)
    codebook_dim: int = Field(128, ge=1)
    vq_hidden_dim: int = 256
    vq_recon_target: str = "prenet"
    adv_gru_dim: int = 256
    adv_hidden_dim: int = 128
    granularity: Granularity = Granularity.FRAME

    @field_validator('vq_recon_target')
    @classmethod
    def _check_recon_target(cls, value: str) -> str:
        if value not in ("prenet", "mel"):
            raise ValueError("vq_recon_target must be 'prenet' or 'mel'")
        return value

    @model_validator(mode="after")
    def _check_fusion(self) -> 'ModelConfig':
        if not self.encoder_prenet_dims or not self.decoder_prenet_dims:
            raise ValueError("pre-nets need at least one layer")
        if self.encoder_dim % 2:
            raise ValueError("encoder_dim must be even (bidirectional halves)")
        if self.adv_gru_dim != self.decoder_prenet_dims[-1]:
            raise ValueError("adv_gru_dim must equal the decoder pre-net output size")
        return self


class TrainConfig(_Section):
    """Training run for one system"""
    mode: TrainMode = TrainMode.BASELINE
    alpha: float = Field(0.25, ge=0.0)
    beta: float = Field(0.25, ge=0.0)
    grl_lambda: float = Field(1.0, gt=0.0)
    grl_schedule: str = "constant"
    grl_warmup_steps: int = Field(1000, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    lr_decay_rate: float = Field(0.5, gt=0, le=1.0)
    lr_decay_steps: int = Field(10000, ge=1)
    grad_clip_norm: float = Field(1.0, gt=0)
    batch_size: int = Field(16, ge=1)
    max_steps: int = Field(20000, ge=1)
    checkpoint_interval: int = Field(1000, ge=1)
    keep_checkpoints: int = Field(5, ge=1)
    log_interval: int = Field(50, ge=1)
    seed: int = 0
    cer_level: float = Field(0.0, ge=0.0, lt=1.0)
    audio_source: AudioSource = AudioSource.CLEAN
    use_auxiliary: bool = False
    dead_code_restart_steps: int = Field(2000, ge=0)
    max_train_utterances: Optional[int] = Field(None, ge=1)

    @field_validator('grl_schedule')
    @classmethod
    def _check_schedule(cls, value: str) -> str:
        if value not in ("constant", "linear_warmup"):
            raise ValueError("grl_schedule must be 'constant' or 'linear_warmup'")
        return value


class EvalConfig(_Section):
    """Synthesis and evaluation battery"""
    stop_threshold: float = Field(0.5, gt=0, lt=1)
    max_length_ratio: float = Field(3.0, ge=1.0)
    synthesis_seed: int = 0
    silence_log_power: float = -3.0
    min_run_frames: int = Field(2, ge=1)
    probe_size: int = Field(200, ge=4)
    probe_epochs: int = Field(300, ge=1)
    probe_lr: float = Field(1e-2, gt=0)
    max_eval_utterances: Optional[int] = Field(None, ge=1)
    workers: int = Field(1, ge=1)
    cells: List[str] = Field(default_factory=lambda: ["A", "D", "VQVAE_D", "H", "ADV_FRAME"])


class FoundTTSConfig(_Section):
    """Root configuration for found-tts"""
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    log_level: str = "INFO"
    output_root: str = "./runs"
    cache_dir: Optional[str] = None

    @field_validator('log_level')
    @classmethod
    def _check_level(cls, value: str) -> str:
        value = value.upper()
        if value not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {value}")
        return value

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base"""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        key = ".".join(str(p) for p in item.get('loc', ())) or "<root>"
        parts.append(f"{key}: {item.get('msg')}")
    return "; ".join(parts)


class ConfigLoader:
    """Load configuration from various sources"""

    @staticmethod
    def from_yaml(config_path: Union[str, Path]) -> FoundTTSConfig:
        """Load configuration from YAML file"""
        return ConfigLoader.from_dict(ConfigLoader._read_yaml(config_path))

    @staticmethod
    def from_json(config_path: Union[str, Path]) -> FoundTTSConfig:
        """Load configuration from JSON file"""
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigError(f"Config file not found: {config_path}")
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {config_path} is not valid JSON: {e}") from e
        return ConfigLoader.from_dict(data)

    @staticmethod
    def from_dict(config_dict: Dict[str, Any]) -> FoundTTSConfig:
        """Load configuration from dictionary"""
        try:
            return FoundTTSConfig.model_validate(config_dict or {})
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration: {_format_validation_error(e)}") from e

    @staticmethod
    def from_env(prefix: str = ENV_PREFIX) -> FoundTTSConfig:
        """Load configuration from environment variables on top of defaults"""
        return ConfigLoader.from_dict(ConfigLoader.env_overrides(prefix))

    @staticmethod
    def env_overrides(prefix: str = ENV_PREFIX) -> Dict[str, Any]:
        """Nested override dict from FOUND_TTS_<SECTION>__<KEY> variables"""
        overrides: Dict[str, Any] = {}
        for key, raw in os.environ.items():
            if not key.startswith(prefix):
                continue
            path = [p.lower() for p in key[len(prefix):].split("__") if p]
            if not path or path[0] == "run_trends":
                continue
            try:
                value = yaml.safe_load(raw)
            except yaml.YAMLError:
                value = raw
            node = overrides
            for part in path[:-1]:
                node = node.setdefault(part, {})
            node[path[-1]] = value
        return overrides

    @staticmethod
    def load(
        config_path: Optional[Union[str, Path]] = None,
        overrides: Optional[Dict[str, Any]] = None,
        prefix: str = ENV_PREFIX,
    ) -> FoundTTSConfig:
        """Layered load: defaults < file < environment < overrides"""
        data: Dict[str, Any] = {}
        if config_path is not None:
            path = Path(config_path)
            if path.suffix.lower() == ".json":
                data = ConfigLoader.from_json(path).to_dict()
            else:
                data = ConfigLoader._read_yaml(path)
        data = deep_merge(data, ConfigLoader.env_overrides(prefix))
        data = deep_merge(data, overrides or {})
        return ConfigLoader.from_dict(data)

    @staticmethod
    def create_default_config() -> FoundTTSConfig:
        """Create a default configuration"""
        return FoundTTSConfig()

    @staticmethod
    def _read_yaml(config_path: Union[str, Path]) -> Dict[str, Any]:
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigError(f"Config file not found: {config_path}")
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Config file {config_path} is not valid YAML: {e}") from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {config_path} must contain a mapping")
        return data


def save_config(config: FoundTTSConfig, path: Union[str, Path], format: str = 'yaml'):
    """Save configuration to file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    config_dict = config.to_dict()

    with open(path, 'w', encoding='utf-8') as f:
        if format.lower() == 'yaml':
            yaml.safe_dump(config_dict, f, default_flow_style=False, sort_keys=True)
        elif format.lower() == 'json':
            json.dump(config_dict, f, indent=2, sort_keys=True)
        else:
            raise ValueError(f"Unsupported format: {format}")
