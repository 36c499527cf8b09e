# ============================================================================
# found_tts/pipeline/evaluator.py
# ============================================================================

"""
Evaluator
=========

Metric battery for a trained system on the reserved eval split: MCD against
the clean (and, when present, the noisy) reference, character-level
generation error through the template matcher, attention monotonicity,
truncation rate, codebook diagnostics for VQ systems and a noise probe on the
frozen attention-query features.

Every number except the probe accuracy is recomputable from the written
synthesis artifacts and the corpus manifest (see `rescore_from_artifacts`).
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core.checkpoints import Checkpoint, read_checkpoint
from ..core.common import (
    CorpusManifest, EditSummary, EvalReport, Granularity, NoiseCondition, PipelineStep, ProbeReport,
    RunContext, Split, SynthesisResult, UtteranceRecord,
)
from ..core.config import EvalConfig, FoundTTSConfig
from ..core.errors import CheckpointMismatchError, ConfigError, CorpusIOError
from ..corpus.builder import inventory_for_manifest, target_voice
from ..corpus.matcher import TemplateMatcher
from ..dsp.features import MelNormalizer, read_mel
from ..dsp.metrics import dtw_arrays, mcd, mel_cepstrum
from ..model.acoustic import AcousticModel
from ..model.adversarial import sentence_pool
from ..model.attention import attention_monotonicity
from ..model.vq import cluster_purity, codebook_health
from .synthesizer import SYNTHESIS_INDEX, Synthesizer, read_synthesis, write_synthesis
from .trainer import target_speaker

__all__ = ['Evaluator', 'NoiseProbe', 'UtteranceScore', 'eval_records', 'frame_labels',
           'rescore_from_artifacts', 'REPORT_NAME']

REPORT_NAME = "report.json"


@dataclass
class UtteranceScore:
    id: str
    mcd: float
    mcd_noisy: Optional[float]
    cger: EditSummary
    monotonicity: float
    truncated: bool
    codebook_indices: Optional[np.ndarray] = None
    reference_labels: Optional[List[str]] = None


def frame_labels(symbols: Sequence[str], durations: Sequence[int], n_frames: Optional[int] = None) -> List[str]:
    """Per-frame symbol labels from durations, clipped or edge-padded to n_frames"""
    labels = [s for s, d in zip(symbols, durations) for _ in range(int(d))]
    if n_frames is None or not labels:
        return labels
    if len(labels) >= n_frames:
        return labels[:n_frames]
    return labels + [labels[-1]] * (n_frames - len(labels))


def eval_records(manifest: CorpusManifest, limit: Optional[int] = None) -> List[UtteranceRecord]:
    """Target-speaker eval utterances in manifest order"""
    target = target_speaker(manifest)
    records = [r for r in manifest.by_split(Split.EVAL) if r.speaker == target]
    if not records:
        raise ConfigError("Corpus has no eval utterances for the target speaker")
    return records[:limit] if limit else records


def _has_noisy_reference(record: UtteranceRecord) -> bool:
    return bool(record.clean_mel_path) and record.clean_mel_path != record.mel_path


def score_utterance(record: UtteranceRecord, result: SynthesisResult, manifest: CorpusManifest,
                    matcher: TemplateMatcher) -> UtteranceScore:
    """Per-utterance metrics of one synthesized mel against its references"""
    reference = read_mel(manifest.resolve(record.clean_mel_path or record.mel_path))
    noisy = read_mel(manifest.resolve(record.mel_path)) if _has_noisy_reference(record) else None

    labels = None
    indices = result.codebook_indices
    if indices is not None and len(indices):
        ref_labels = frame_labels(record.symbols, record.durations, reference.n_frames)
        path, _ = dtw_arrays(mel_cepstrum(reference.frames), mel_cepstrum(result.mel.frames))
        mapped: Dict[int, int] = {}
        for i, j in path.pairs:
            mapped.setdefault(j, i)
        labels = [ref_labels[mapped[j]] for j in range(len(indices))]

    return UtteranceScore(
        id=record.id,
        mcd=mcd(reference, result.mel),
        mcd_noisy=mcd(noisy, result.mel) if noisy is not None else None,
        cger=matcher.score(result.mel, record.symbols),
        monotonicity=attention_monotonicity(result.alignments),
        truncated=result.truncated,
        codebook_indices=indices,
        reference_labels=labels,
    )


def _aggregate(system_id: str, corpus_cer: float, scores: List[UtteranceScore],
               codebook_size: Optional[int], probe: Optional[ProbeReport]) -> EvalReport:
    noisy = [s.mcd_noisy for s in scores if s.mcd_noisy is not None]
    perplexity = purity = None
    coded = [s for s in scores if s.codebook_indices is not None and len(s.codebook_indices)]
    if coded and codebook_size:
        indices = np.concatenate([s.codebook_indices for s in coded])
        perplexity = codebook_health(indices, codebook_size).perplexity
        purity = cluster_purity(indices, [label for s in coded for label in s.reference_labels])
    return EvalReport(
        system_id=system_id,
        corpus_cer=corpus_cer,
        mcd_mean=float(np.mean([s.mcd for s in scores])),
        cger=EditSummary.merge([s.cger for s in scores]),
        attention_monotonicity=float(np.mean([s.monotonicity for s in scores])),
        truncation_rate=float(np.mean([s.truncated for s in scores])),
        n_utterances=len(scores),
        noise_probe_accuracy=probe.accuracy if probe else None,
        mcd_noisy_mean=float(np.mean(noisy)) if noisy else None,
        codebook_perplexity=perplexity,
        cluster_purity=purity,
    )


def _score_all(records: List[UtteranceRecord], results: Dict[str, SynthesisResult], manifest: CorpusManifest,
               matcher: TemplateMatcher, workers: int) -> List[UtteranceScore]:
    missing = [r.id for r in records if r.id not in results]
    if missing:
        raise CorpusIOError(f"No synthesis for eval utterances {missing[:5]}")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: score_utterance(r, results[r.id], manifest, matcher), records))


def _matcher(manifest: CorpusManifest, eval_config: EvalConfig) -> TemplateMatcher:
    inventory = inventory_for_manifest(manifest)
    return TemplateMatcher(inventory, target_voice(manifest, inventory),
                           eval_config.silence_log_power, eval_config.min_run_frames)


def rescore_from_artifacts(synth_dir: Union[str, Path], manifest: CorpusManifest,
                           eval_config: Optional[EvalConfig] = None) -> EvalReport:
    """Rebuild an eval report from written synthesis artifacts alone; no probe"""
    eval_config = eval_config or EvalConfig()
    synth_dir = Path(synth_dir)
    results = read_synthesis(synth_dir)
    records = [r for r in eval_records(manifest, eval_config.max_eval_utterances) if r.id in results]
    if not records:
        raise CorpusIOError(f"{synth_dir} holds no synthesis for this corpus's eval split")
    meta = next(iter(results.values())).metadata
    scores = _score_all(records, results, manifest, _matcher(manifest, eval_config), eval_config.workers)
    return _aggregate(meta.get('system_id', 'system'), float(meta.get('corpus_cer', 0.0)), scores,
                      meta.get('codebook_size'), None)


# ============================================================================
# NOISE PROBE
# ============================================================================

class NoiseProbe:
    """
    Detectability of the recording condition from frozen query features.

    Clean and noisy renderings of the same eval utterances are passed
    teacher-forced through the model; a small classifier is trained on the
    first half of the utterances and scored on the second half.
    """

    def __init__(self, eval_config: EvalConfig, seed: int = 0):
        self.eval_config = eval_config
        self.seed = seed
        self.logger = logging.getLogger(self.__class__.__name__)

    @torch.no_grad()
    def features(self, model: AcousticModel, mel: np.ndarray, normalizer: MelNormalizer,
                 granularity: Granularity) -> torch.Tensor:
        frames = torch.from_numpy(normalizer.normalize(mel)).unsqueeze(0)
        go = frames.new_full((1, 1, frames.shape[-1]), normalizer.silence)
        mel_inputs = torch.cat([go, frames[:, :-1]], dim=1)
        z = model.query_features(mel_inputs)
        if granularity == Granularity.SENTENCE:
            return sentence_pool(z)
        return z[0]

    def collect(self, model: AcousticModel, manifest: CorpusManifest, records: List[UtteranceRecord],
                normalizer: MelNormalizer, granularity: Granularity) -> List[Tuple[torch.Tensor, torch.Tensor]]:
        """Per-utterance (features, labels) pairs, clean copy then noisy copy"""
        groups = []
        was_training = model.training
        model.eval()
        try:
            with torch.random.fork_rng(devices=[]):
                torch.manual_seed(self.seed)
                for record in records:
                    pair = []
                    for path, condition in ((record.clean_mel_path, NoiseCondition.CLEAN),
                                            (record.mel_path, record.condition)):
                        x = self.features(model, read_mel(manifest.resolve(path)).frames, normalizer, granularity)
                        pair.append((x, torch.full((x.shape[0],), condition.label, dtype=torch.long)))
                    groups.append((torch.cat([p[0] for p in pair]), torch.cat([p[1] for p in pair])))
        finally:
            model.train(was_training)
        return groups

    def fit(self, train_x: torch.Tensor, train_y: torch.Tensor, test_x: torch.Tensor,
            test_y: torch.Tensor, granularity: str) -> ProbeReport:
        cfg = self.eval_config
        mean = train_x.mean(dim=0, keepdim=True)
        std = train_x.std(dim=0, keepdim=True).clamp_min(1e-6)
        train_x = (train_x - mean) / std
        test_x = (test_x - mean) / std

        generator = torch.Generator().manual_seed(self.seed)
        probe = nn.Sequential(nn.Linear(train_x.shape[1], 64), nn.ReLU(), nn.Linear(64, 2))
        with torch.no_grad():
            for layer in probe:
                if isinstance(layer, nn.Linear):
                    bound = 1.0 / layer.in_features ** 0.5
                    layer.weight.uniform_(-bound, bound, generator=generator)
                    layer.bias.zero_()
        optimizer = torch.optim.Adam(probe.parameters(), lr=cfg.probe_lr)
        for _ in range(cfg.probe_epochs):
            optimizer.zero_grad()
            F.cross_entropy(probe(train_x), train_y).backward()
            optimizer.step()

        with torch.no_grad():
            predicted = probe(test_x).argmax(dim=-1)
        confusion = [[int(((test_y == t) & (predicted == p)).sum()) for p in range(2)] for t in range(2)]
        return ProbeReport(
            accuracy=float((predicted == test_y).float().mean()),
            confusion=confusion,
            n_train=int(train_x.shape[0]),
            n_test=int(test_x.shape[0]),
            granularity=granularity,
        )

    def run(self, model: AcousticModel, manifest: CorpusManifest, records: List[UtteranceRecord],
            normalizer: MelNormalizer) -> Optional[ProbeReport]:
        """Probe report, or None when the eval split has no noisy renderings"""
        usable = [r for r in records if _has_noisy_reference(r)][:self.eval_config.probe_size]
        if len(usable) < 2:
            self.logger.info("Skipping noise probe: eval split has no clean/noisy pairs")
            return None
        granularity = model.config.granularity
        groups = self.collect(model, manifest, usable, normalizer, granularity)
        half = len(groups) // 2
        train_x = torch.cat([g[0] for g in groups[:half]])
        train_y = torch.cat([g[1] for g in groups[:half]])
        test_x = torch.cat([g[0] for g in groups[half:]])
        test_y = torch.cat([g[1] for g in groups[half:]])
        report = self.fit(train_x.float(), train_y, test_x.float(), test_y, granularity.value)
        self.logger.info(f"Noise probe ({granularity.value}): accuracy {report.accuracy:.3f} "
                         f"on {report.n_test} held-out samples")
        return report


# ============================================================================
# EVALUATOR
# ============================================================================

class Evaluator(PipelineStep):
    """Synthesize the eval split with a checkpoint and score it"""

    def __init__(self, config: Optional[FoundTTSConfig] = None):
        super().__init__(config or FoundTTSConfig())
        self.logger = logging.getLogger(self.__class__.__name__)

    @property
    def eval_config(self) -> EvalConfig:
        return self.config.eval

    def run(self, input_data: CorpusManifest, context: RunContext) -> EvalReport:
        checkpoint = context.metadata.get('checkpoint')
        if checkpoint is None:
            raise ConfigError("Evaluation needs a checkpoint in the run context")
        return self.evaluate(checkpoint, input_data, context.output_dir)

    @staticmethod
    def check_compatible(checkpoint: Checkpoint, manifest: CorpusManifest):
        """Raise CheckpointMismatchError if the checkpoint was trained on another corpus"""
        extra = checkpoint.extra
        if extra.get('corpus_seed') is not None and extra['corpus_seed'] != manifest.seed:
            raise CheckpointMismatchError(
                f"Checkpoint was trained on corpus seed {extra['corpus_seed']}, corpus has seed {manifest.seed}"
            )
        symbols = inventory_for_manifest(manifest).symbols
        if extra.get('vocab') != symbols:
            raise CheckpointMismatchError("Checkpoint vocabulary differs from the corpus symbol inventory")
        target = target_speaker(manifest)
        if target not in extra.get('speakers', []):
            raise CheckpointMismatchError(f"Checkpoint does not know target speaker {target!r}")

    def evaluate(self, checkpoint: Union[str, Path, Checkpoint], manifest: CorpusManifest,
                 output_dir: Optional[Union[str, Path]] = None, probe: bool = True) -> EvalReport:
        """
        Synthesize every eval utterance, write artifacts under
        `output_dir/synth` (when given) and return the report.
        """
        if not isinstance(checkpoint, Checkpoint):
            checkpoint = read_checkpoint(checkpoint)
        self.check_compatible(checkpoint, manifest)
        cfg = self.eval_config
        synthesizer = Synthesizer.from_checkpoint(checkpoint, cfg)
        model = synthesizer.model
        corpus_cer = float(checkpoint.extra.get('corpus_cer', 0.0))
        codebook_size = model.config.codebook_size if model.has_vq else None
        target = target_speaker(manifest)

        synth_dir = None
        if output_dir is not None:
            synth_dir = Path(output_dir) / "synth"
            synth_dir.mkdir(parents=True, exist_ok=True)
            (synth_dir / SYNTHESIS_INDEX).unlink(missing_ok=True)

        records = eval_records(manifest, cfg.max_eval_utterances)
        self.logger.info(f"Evaluating {synthesizer.system_id} on {len(records)} eval utterances")
        results: Dict[str, SynthesisResult] = {}
        for i, record in enumerate(records):
            result = synthesizer.synthesize(
                record.symbols, speaker=target, condition=NoiseCondition.CLEAN,
                expected_frames=record.n_frames, seed=cfg.synthesis_seed + i,
            )
            result.metadata.update({'corpus_cer': corpus_cer, 'codebook_size': codebook_size})
            if synth_dir is not None:
                write_synthesis(result, record.id, synth_dir)
            results[record.id] = result

        scores = _score_all(records, results, manifest, _matcher(manifest, cfg), cfg.workers)
        probe_report = None
        if probe:
            probe_report = NoiseProbe(cfg, cfg.synthesis_seed).run(
                model, manifest, records, synthesizer.normalizer
            )
        report = _aggregate(synthesizer.system_id, corpus_cer, scores, codebook_size, probe_report)

        if output_dir is not None:
            path = Path(output_dir) / REPORT_NAME
            payload = report.to_dict()
            payload['noise_probe'] = probe_report.to_dict() if probe_report else None
            try:
                path.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding='utf-8')
            except OSError as e:
                raise CorpusIOError(f"Cannot write eval report {path}: {e}") from e
        self.logger.info(f"{report.system_id}: MCD {report.mcd_mean:.2f} dB, CGER {report.cger_rate:.3f}, "
                         f"truncation {report.truncation_rate:.2f}")
        return report
