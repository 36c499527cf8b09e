# ============================================================================
# found_tts/corpus/builder.py
# ============================================================================

"""
Corpus Builder
==============

Generates the synthetic found-data corpus: a noisy target speaker with
corrupted transcripts and an auxiliary speaker emitted clean and, for
adversarial augmentation, as a second noisy copy.

Rendering fans out over a process pool with per-utterance seeds; transcript
corruption and manifest assembly run in the single writer so the corpus-level
error diffusion is deterministic.
"""

import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..core.common import (
    MANIFEST_VERSION, CorpusManifest, NoiseCondition, NoiseKind, PipelineStep, RunContext,
    Split, SpeakerRole, UtteranceRecord, cer_level_key,
)
from ..core.config import CorpusConfig, FeatureConfig, FoundTTSConfig
from ..core.errors import CorpusIOError
from ..dsp.features import mel_spectrogram, write_mel
from .corruption import TranscriptCorruptor
from .inventory import SymbolInventory
from .io import MANIFEST_NAME, write_manifest, write_transcripts, write_wav
from .noise import load_noise_file, mix_noise
from .render import render_waveform
from .templates import Voice

__all__ = ['CorpusBuilder', 'build_corpus', 'RenderJob', 'inventory_for_manifest', 'target_voice']

logger = logging.getLogger(__name__)


@dataclass
class RenderJob:
    """Everything a worker needs to render one base utterance"""
    base_id: str
    symbols: List[str]
    durations: List[int]
    voice: Voice
    seed: Tuple[int, ...]
    role: SpeakerRole
    snr_db: Optional[float]
    noise_kind: Optional[NoiseKind]
    noisy_copy: bool


_WORKER: Dict[str, Any] = {}


def _init_worker(inventory: SymbolInventory, out_dir: str, user_noise: Optional[np.ndarray]):
    _WORKER['inventory'] = inventory
    _WORKER['out_dir'] = Path(out_dir)
    _WORKER['user_noise'] = user_noise


def _emit(waveform: np.ndarray, stem: str, subdir: str) -> Tuple[str, str]:
    inventory: SymbolInventory = _WORKER['inventory']
    out_dir: Path = _WORKER['out_dir']
    wav_rel = f"{subdir}/{stem}.wav"
    mel_rel = f"{subdir}/{stem}.mel"
    write_wav(waveform, out_dir / wav_rel, inventory.features.sample_rate)
    write_mel(mel_spectrogram(waveform, inventory.features), out_dir / mel_rel)
    return wav_rel, mel_rel


def _render_job(job: RenderJob) -> Dict[str, Any]:
    """Render, mix and write the audio of one base utterance"""
    inventory: SymbolInventory = _WORKER['inventory']
    clean = render_waveform(job.symbols, job.durations, inventory, job.seed + (1,), job.voice)
    outcome: Dict[str, Any] = {'base_id': job.base_id}

    if job.role == SpeakerRole.TARGET:
        outcome['clean'] = _emit(clean, job.base_id, "clean")
        noisy = job.snr_db is not None
    else:
        outcome['clean'] = _emit(clean, f"{job.base_id}_clean", "wav")
        noisy = job.noisy_copy and job.snr_db is not None

    if noisy:
        mix = mix_noise(
            clean, job.noise_kind, job.snr_db, np.random.default_rng(job.seed + (2,)),
            inventory=inventory, sample_rate=inventory.features.sample_rate,
            user_noise=_WORKER.get('user_noise'),
        )
        stem = job.base_id if job.role == SpeakerRole.TARGET else f"{job.base_id}_noisy"
        outcome['noisy'] = _emit(mix.waveform, stem, "wav")
        outcome['gain'] = mix.gain
    return outcome


class CorpusBuilder(PipelineStep):
    """Build a corpus directory with manifest, audio, mels and transcripts"""

    def __init__(self, config: Optional[FoundTTSConfig] = None):
        super().__init__(config or FoundTTSConfig())
        self.logger = logging.getLogger(self.__class__.__name__)
        self._corruption_summary: Dict[str, Any] = {}

    @property
    def corpus(self) -> CorpusConfig:
        return self.config.corpus

    @property
    def features(self) -> FeatureConfig:
        return self.config.features

    def run(self, input_data: Any, context: RunContext) -> CorpusManifest:
        """input_data: optional `force` flag"""
        return self.build(context.output_dir, context.seed, force=bool(input_data))

    def build(self, out_dir: Union[str, Path], seed: int = 0, force: bool = False) -> CorpusManifest:
        out_dir = Path(out_dir)
        if (out_dir / MANIFEST_NAME).exists():
            if not force:
                raise CorpusIOError(f"{out_dir} already holds a corpus; use --force to overwrite")
            self.logger.warning(f"Overwriting corpus in {out_dir}")
            for sub in ("wav", "mel", "clean", "text"):
                shutil.rmtree(out_dir / sub, ignore_errors=True)

        inventory = SymbolInventory.build(self.corpus, self.features, seed=seed)
        user_noise = None
        if self.corpus.user_noise_file:
            user_noise = load_noise_file(self.corpus.user_noise_file, self.features.sample_rate)

        jobs, splits = self._plan(inventory, seed)
        self.logger.info(f"Rendering {len(jobs)} utterances with {self.corpus.workers} worker(s)")
        outcomes = self._render(jobs, inventory, out_dir, user_noise)

        records = self._assemble(jobs, outcomes, splits, inventory, seed, out_dir)
        manifest = CorpusManifest(
            version=MANIFEST_VERSION,
            seed=seed,
            records=records,
            root=out_dir,
            config={
                'corpus': self.corpus.model_dump(mode="json"),
                'features': self.features.model_dump(mode="json"),
                'corruption': self._corruption_summary,
            },
        )
        problems = manifest.validate(self.corpus.eval_size)
        if problems:
            raise CorpusIOError(f"Generated manifest is invalid: {'; '.join(problems)}")
        write_manifest(manifest, out_dir)
        self.logger.info(f"Corpus written: {len(records)} records, labels {manifest.label_counts()}")
        return manifest

    # ------------------------------------------------------------------

    def _plan(self, inventory: SymbolInventory, seed: int) -> Tuple[List[RenderJob], Dict[str, Split]]:
        jobs: List[RenderJob] = []
        splits: Dict[str, Split] = {}
        for spk_idx, speaker in enumerate(self.corpus.speakers):
            voice = inventory.voice_for(speaker)
            order = np.random.default_rng([seed, spk_idx, 99]).permutation(speaker.n_utterances)
            eval_ids = set(order[:self.corpus.eval_size].tolist())
            dev_ids = set(order[self.corpus.eval_size:self.corpus.eval_size + self.corpus.dev_size].tolist())
            for utt_idx in range(speaker.n_utterances):
                rng = np.random.default_rng([seed, spk_idx, utt_idx, 0])
                symbols, durations = inventory.sample_utterance(
                    rng, self.corpus.min_symbols, self.corpus.max_symbols
                )
                noise_kind = None
                if speaker.snr_db is not None:
                    kinds = list(speaker.noise_kinds)
                    if self.corpus.user_noise_file and NoiseKind.USER_FILE not in kinds:
                        kinds.append(NoiseKind.USER_FILE)
                    noise_kind = kinds[int(rng.integers(len(kinds)))]
                base_id = f"{speaker.name}_{utt_idx:05d}"
                jobs.append(RenderJob(
                    base_id=base_id, symbols=symbols, durations=durations, voice=voice,
                    seed=(seed, spk_idx, utt_idx), role=speaker.role, snr_db=speaker.snr_db,
                    noise_kind=noise_kind, noisy_copy=speaker.noisy_copy,
                ))
                if speaker.role == SpeakerRole.TARGET and utt_idx in eval_ids:
                    splits[base_id] = Split.EVAL
                elif speaker.role == SpeakerRole.TARGET and utt_idx in dev_ids:
                    splits[base_id] = Split.DEV
                else:
                    splits[base_id] = Split.TRAIN
        return jobs, splits

    def _render(self, jobs: List[RenderJob], inventory: SymbolInventory, out_dir: Path,
                user_noise: Optional[np.ndarray]) -> List[Dict[str, Any]]:
        init_args = (inventory, str(out_dir), user_noise)
        if self.corpus.workers <= 1:
            _init_worker(*init_args)
            outcomes = []
            for i, job in enumerate(jobs, 1):
                outcomes.append(_render_job(job))
                if i % 500 == 0:
                    self.logger.info(f"Rendered {i}/{len(jobs)} utterances")
            return outcomes
        with ProcessPoolExecutor(max_workers=self.corpus.workers, initializer=_init_worker,
                                 initargs=init_args) as pool:
            return list(pool.map(_render_job, jobs, chunksize=16))

    def _assemble(self, jobs: List[RenderJob], outcomes: List[Dict[str, Any]], splits: Dict[str, Split],
                  inventory: SymbolInventory, seed: int, out_dir: Path) -> List[UtteranceRecord]:
        corruptors: Dict[Tuple[str, str], TranscriptCorruptor] = {}
        streams: Dict[Tuple[str, str], np.random.Generator] = {}
        for spk_idx, speaker in enumerate(self.corpus.speakers):
            for lvl_idx, level in enumerate(speaker.cer_levels()):
                key = (speaker.name, cer_level_key(level))
                corruptors[key] = TranscriptCorruptor(
                    level, self.corpus.corruption_mix, inventory, self.corpus.drop_boundaries
                )
                streams[key] = np.random.default_rng([seed, spk_idx, 3, lvl_idx])
        speakers = {s.name: s for s in self.corpus.speakers}

        records: List[UtteranceRecord] = []
        for job, outcome in zip(jobs, outcomes):
            speaker = speakers[job.base_id.rsplit("_", 1)[0]]
            split = splits[job.base_id]

            transcripts: Dict[str, List[str]] = {}
            achieved: Dict[str, float] = {}
            if split != Split.EVAL:
                for level in speaker.cer_levels():
                    key = (speaker.name, cer_level_key(level))
                    result = corruptors[key].corrupt(job.symbols, streams[key])
                    transcripts[key[1]] = result.symbols
                    achieved[key[1]] = result.achieved_cer
            primary = cer_level_key(speaker.cer)
            transcript = transcripts.get(primary, list(job.symbols))
            text_rel = f"text/{job.base_id}.txt"
            write_transcripts({'golden': list(job.symbols), **transcripts}, out_dir / text_rel)

            common = dict(
                speaker=speaker.name, split=split, symbols=list(job.symbols),
                durations=list(job.durations), transcript=transcript,
                cer=achieved.get(primary, 0.0), n_frames=int(sum(job.durations)),
                transcript_path=text_rel, transcripts=transcripts,
            )
            clean_wav, clean_mel = outcome['clean']
            if job.role == SpeakerRole.TARGET:
                if 'noisy' in outcome:
                    wav, mel = outcome['noisy']
                    records.append(UtteranceRecord(
                        id=job.base_id, condition=NoiseCondition.NOISY, wav_path=wav, mel_path=mel,
                        noise_kind=job.noise_kind, snr_db=job.snr_db, gain=outcome['gain'],
                        clean_wav_path=clean_wav, clean_mel_path=clean_mel, **common,
                    ))
                else:
                    records.append(UtteranceRecord(
                        id=job.base_id, condition=NoiseCondition.CLEAN, wav_path=clean_wav,
                        mel_path=clean_mel, clean_wav_path=clean_wav, clean_mel_path=clean_mel, **common,
                    ))
            else:
                records.append(UtteranceRecord(
                    id=f"{job.base_id}_clean", condition=NoiseCondition.CLEAN, wav_path=clean_wav,
                    mel_path=clean_mel, clean_wav_path=clean_wav, clean_mel_path=clean_mel, **common,
                ))
                if 'noisy' in outcome:
                    wav, mel = outcome['noisy']
                    records.append(UtteranceRecord(
                        id=f"{job.base_id}_noisy", condition=NoiseCondition.NOISY, wav_path=wav,
                        mel_path=mel, noise_kind=job.noise_kind, snr_db=job.snr_db,
                        gain=outcome['gain'], clean_wav_path=clean_wav, clean_mel_path=clean_mel, **common,
                    ))

        self._corruption_summary = {
            f"{name}@{level}": corruptor.summary() for (name, level), corruptor in corruptors.items()
        }
        for key, summary in self._corruption_summary.items():
            self.logger.info(f"Transcript corruption {key}: achieved CER {summary['achieved_cer']:.4f}")
        return records


def build_corpus(config: FoundTTSConfig, seed: int, out_dir: Union[str, Path],
                 force: bool = False) -> CorpusManifest:
    """Generate a corpus and return its manifest"""
    return CorpusBuilder(config).build(out_dir, seed, force=force)


def inventory_for_manifest(manifest: CorpusManifest) -> SymbolInventory:
    """Rebuild the symbol inventory a corpus was generated with"""
    corpus = CorpusConfig.model_validate(manifest.config.get('corpus', {}))
    features = FeatureConfig.model_validate(manifest.config.get('features', {}))
    return SymbolInventory.build(corpus, features, seed=manifest.seed)


def target_voice(manifest: CorpusManifest, inventory: SymbolInventory) -> Voice:
    """Voice of the target speaker of a corpus"""
    corpus = CorpusConfig.model_validate(manifest.config.get('corpus', {}))
    return inventory.voice_for(corpus.target)
