# ============================================================================
# found_tts/pipeline/trainer.py
# ============================================================================

"""
Trainer
=======

Teacher-forced training of one system: Adam with exponential step decay,
gradient-norm clipping, periodic checkpoints, a JSON-lines loss log and a
divergence guard that aborts on a non-finite loss.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import torch

from ..core.checkpoints import CheckpointStore
from ..core.common import (
    CorpusManifest, NoiseCondition, PipelineStep, RunContext, SpeakerRole, cer_level_key,
)
from ..core.config import CorpusConfig, FoundTTSConfig
from ..core.errors import ConfigError, CorpusIOError, TrainingDivergedError
from ..corpus.builder import inventory_for_manifest
from ..dsp.features import MelNormalizer
from ..model.acoustic import AcousticModel
from ..model.batching import SymbolVocabulary, TrainingExample, iterate_batches, load_training_examples
from ..model.losses import compose_losses

__all__ = ['TrainResult', 'Trainer', 'grl_strength', 'LOSS_LOG_NAME']

LOSS_LOG_NAME = "losses.jsonl"


@dataclass
class TrainResult:
    """Outcome of one training run"""
    system_id: str
    checkpoint: Path
    steps: int
    initial_losses: Dict[str, float] = field(default_factory=dict)
    final_losses: Dict[str, float] = field(default_factory=dict)
    loss_log: Optional[Path] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'system_id': self.system_id,
            'checkpoint': str(self.checkpoint),
            'steps': self.steps,
            'initial_losses': self.initial_losses,
            'final_losses': self.final_losses,
            'loss_log': str(self.loss_log) if self.loss_log else None,
        }


def grl_strength(step: int, base: float, schedule: str = "constant", warmup_steps: int = 1000) -> float:
    """GRL lambda at a training step; linear warm-up never returns zero"""
    if schedule == "linear_warmup":
        return base * min(1.0, max(step, 1) / warmup_steps)
    return base


def speaker_table(manifest: CorpusManifest) -> Dict[str, int]:
    """Speaker name -> embedding index, in corpus config order"""
    corpus = CorpusConfig.model_validate(manifest.config.get('corpus', {}))
    return {speaker.name: i for i, speaker in enumerate(corpus.speakers)}


def target_speaker(manifest: CorpusManifest) -> str:
    return CorpusConfig.model_validate(manifest.config.get('corpus', {})).target.name


class Trainer(PipelineStep):
    """Train one acoustic model on a corpus manifest"""

    def __init__(self, config: FoundTTSConfig, system_id: str = "system", device: str = "cpu"):
        super().__init__(config)
        self.system_id = system_id
        self.device = torch.device(device)
        self.logger = logging.getLogger(self.__class__.__name__)

    def run(self, input_data: CorpusManifest, context: RunContext) -> TrainResult:
        return self.train(input_data, context.output_dir)

    # ------------------------------------------------------------------

    def _check_consistency(self, manifest: CorpusManifest, examples: List[TrainingExample]):
        train = self.config.train
        if train.mode.uses_adversarial:
            if not train.use_auxiliary:
                raise ConfigError("train.use_auxiliary must be true for adversarial training")
            corpus = CorpusConfig.model_validate(manifest.config.get('corpus', {}))
            auxiliary = {s.name for s in corpus.speakers if s.role == SpeakerRole.AUXILIARY}
            if not any(r.speaker in auxiliary and r.condition == NoiseCondition.CLEAN for r in manifest.records):
                raise ConfigError("adversarial training needs clean auxiliary recordings in the corpus")
            labels = {e.condition for e in examples}
            if labels != set(NoiseCondition):
                raise ConfigError("adversarial training needs both clean and noisy training utterances")

    def _corpus_cer(self, manifest: CorpusManifest) -> float:
        level = self.config.train.cer_level
        if not level:
            return 0.0
        key = f"{target_speaker(manifest)}@{cer_level_key(level)}"
        summary = manifest.config.get('corruption', {}).get(key)
        if summary is None:
            raise ConfigError(f"train.cer_level: corpus has no transcripts at CER level {cer_level_key(level)}")
        return float(summary['achieved_cer'])

    def build_model(self, vocab_size: int) -> AcousticModel:
        mode = self.config.train.mode
        return AcousticModel(self.config.model, vocab_size, mode.uses_vq, mode.uses_adversarial).to(self.device)

    def train(self, manifest: CorpusManifest, output_dir: Union[str, Path]) -> TrainResult:
        """
        Train until `train.max_steps`; returns the final checkpoint.

        Raises:
            ConfigError: inconsistent config for this corpus
            TrainingDivergedError: non-finite loss; carries the last good checkpoint
        """
        cfg = self.config
        train = cfg.train
        output_dir = Path(output_dir)
        store = CheckpointStore(output_dir / "checkpoints", keep=train.keep_checkpoints)

        inventory = inventory_for_manifest(manifest)
        vocab = SymbolVocabulary(inventory.symbols)
        speakers = speaker_table(manifest)
        if len(speakers) > cfg.model.n_speakers:
            raise ConfigError(f"model.n_speakers: corpus has {len(speakers)} speakers")
        if cfg.model.n_mels != inventory.features.n_mels:
            raise ConfigError(f"model.n_mels: corpus mels have {inventory.features.n_mels} bands")
        normalizer = MelNormalizer(inventory.features.log_floor)
        corpus_cer = self._corpus_cer(manifest)

        examples = load_training_examples(
            manifest, train, vocab, normalizer, speakers, limit=train.max_train_utterances,
        )
        self._check_consistency(manifest, examples)

        torch.manual_seed(train.seed)
        rng = np.random.default_rng(train.seed)
        restart_generator = torch.Generator().manual_seed(train.seed + 1)
        model = self.build_model(len(vocab))
        model.train()
        optimizer = torch.optim.Adam(model.parameters(), lr=train.learning_rate)
        scheduler = torch.optim.lr_scheduler.ExponentialLR(
            optimizer, gamma=train.lr_decay_rate ** (1.0 / train.lr_decay_steps)
        )

        extra = {
            'system_id': self.system_id,
            'vocab': vocab.symbols,
            'speakers': list(speakers),
            'corpus_seed': manifest.seed,
            'corpus_cer': corpus_cer,
            'features': inventory.features.model_dump(mode="json"),
            'frames_per_symbol': float(np.mean(inventory.duration_range)),
        }
        train_dump = train.model_dump(mode="json")

        output_dir.mkdir(parents=True, exist_ok=True)
        log_path = output_dir / LOSS_LOG_NAME
        self.logger.info(
            f"Training {self.system_id}: mode={train.mode.value}, attention={cfg.model.attention.value}, "
            f"{len(examples)} utterances, {train.max_steps} steps"
        )

        step = 0
        initial: Dict[str, float] = {}
        last: Dict[str, float] = {}
        last_checkpoint: Optional[Path] = None
        try:
            log_file = open(log_path, 'w', encoding='utf-8')
        except OSError as e:
            raise CorpusIOError(f"Cannot write loss log {log_path}: {e}") from e

        with log_file:
            while step < train.max_steps:
                for batch in iterate_batches(examples, train.batch_size, rng, normalizer.silence):
                    step += 1
                    batch = batch.to(self.device)
                    grl = grl_strength(step, train.grl_lambda, train.grl_schedule, train.grl_warmup_steps)
                    outputs = model(
                        batch.text, batch.text_lengths, batch.mel_inputs, batch.speakers, batch.conditions,
                        batch.frame_mask, grl_lambda=grl,
                    )
                    terms = compose_losses(outputs, batch, train)
                    total = terms.total
                    if not torch.isfinite(total):
                        raise TrainingDivergedError(
                            f"{self.system_id}: loss became non-finite at step {step}", last_checkpoint
                        )

                    optimizer.zero_grad()
                    total.backward()
                    torch.nn.utils.clip_grad_norm_(model.parameters(), train.grad_clip_norm)
                    optimizer.step()
                    scheduler.step()

                    if model.has_vq:
                        model.vq.usage.record(outputs.vq.indices[batch.frame_mask], step)
                        model.vq.restart_dead(step, train.dead_code_restart_steps,
                                              outputs.vq.z_e[batch.frame_mask], restart_generator)

                    last = terms.as_dict()
                    if step == 1:
                        initial = dict(last)
                    if step == 1 or step % train.log_interval == 0 or step == train.max_steps:
                        entry = {'step': step, 'lr': scheduler.get_last_lr()[0], 'grl_lambda': grl, **last}
                        if model.has_vq:
                            entry['codebook_perplexity'] = model.vq.usage.health().perplexity
                            model.vq.usage.reset()
                        log_file.write(json.dumps(entry, sort_keys=True) + "\n")
                        log_file.flush()
                        self.logger.info(f"[{self.system_id}] step {step}: total={last['total']:.4f} "
                                         f"mel={last['mel']:.4f}")

                    if step % train.checkpoint_interval == 0 or step == train.max_steps:
                        checkpoint = model.to_checkpoint(step, train_dump, last, extra)
                        last_checkpoint = store.save(checkpoint)
                    if step >= train.max_steps:
                        break

        if not math.isfinite(last.get('total', float('nan'))):
            raise TrainingDivergedError(f"{self.system_id}: no finite loss recorded", last_checkpoint)
        return TrainResult(
            system_id=self.system_id,
            checkpoint=last_checkpoint,
            steps=step,
            initial_losses=initial,
            final_losses=last,
            loss_log=log_path,
        )
