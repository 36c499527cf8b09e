"""
found-tts Pipeline: Experiment Matrix Orchestrator
==================================================

Runs named system cells (train + evaluate) against a generated corpus and
collects their reports into one comparison table.

Each cell is an independent worker: cells run concurrently in an executor
and a failing cell is recorded as a failed `CellResult` while the rest of the
matrix continues.

Example:
    from found_tts.core import ConfigLoader
    from found_tts.pipeline import ExperimentPipeline

    config = ConfigLoader.load("configs/toy.yaml")
    pipeline = ExperimentPipeline(config, "runs/corpus", "runs/matrix")

    results = await pipeline.process_batch(["A", "D", "H"])
    pipeline.write_comparison(results)
"""

import asyncio
import json
import logging
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..core.common import CellResult, EvalReport, RunContext
from ..core.config import ConfigLoader, FoundTTSConfig, deep_merge, save_config
from ..core.errors import ConfigError
from ..corpus.io import load_manifest
from .evaluator import Evaluator
from .trainer import Trainer

__all__ = ['CellSpec', 'CELLS', 'ExperimentPipeline', 'run_cell', 'comparison_table', 'format_table']

COMPARISON_JSON = "comparison.json"
COMPARISON_TEXT = "comparison.txt"


@dataclass(frozen=True)
class CellSpec:
    """One named system of the experiment grid"""
    name: str
    description: str
    overrides: Dict[str, Any] = field(default_factory=dict)
    manifest: str = "default"


def _cell(name: str, description: str, manifest: str = "default", model: Optional[Dict[str, Any]] = None,
          **train: Any) -> CellSpec:
    overrides: Dict[str, Any] = {'train': train}
    if model:
        overrides['model'] = model
    return CellSpec(name, description, overrides, manifest)


_ADV = dict(mode="adversarial", cer_level=0.233, audio_source="noisy", use_auxiliary=True)

CELLS: Dict[str, CellSpec] = {cell_spec.name: cell_spec for cell_spec in [
    _cell("A", "baseline, golden transcripts, clean audio", cer_level=0.0, audio_source="clean"),
    _cell("B", "baseline, 8.8% CER transcripts", cer_level=0.088, audio_source="clean"),
    _cell("C", "baseline, 11.7% CER transcripts", cer_level=0.117, audio_source="clean"),
    _cell("D", "baseline, 23.3% CER transcripts", cer_level=0.233, audio_source="clean"),
    _cell("E", "baseline, 23.3% CER, location-sensitive attention", cer_level=0.233,
          audio_source="clean", model={'attention': "lsa"}),
    _cell("F", "baseline, golden transcripts, 8 dB noisy audio", manifest="snr8",
          cer_level=0.0, audio_source="noisy"),
    _cell("G", "baseline, golden transcripts, 4 dB noisy audio", cer_level=0.0, audio_source="noisy"),
    _cell("H", "baseline, 23.3% CER, 4 dB noisy audio", cer_level=0.233, audio_source="noisy"),
    _cell("VQVAE_A", "VQ branch, golden transcripts, clean audio", mode="vq", cer_level=0.0,
          audio_source="clean"),
    _cell("VQVAE_D", "VQ branch, 23.3% CER, clean audio", mode="vq", cer_level=0.233, audio_source="clean"),
    _cell("ADV_SEN", "adversarial, sentence-level classifier", model={'granularity': "sentence"}, **_ADV),
    _cell("ADV_FRAME", "adversarial, frame-level classifier", model={'granularity': "frame"}, **_ADV),
    _cell("ADV_FRAME_NOGRL", "frame-level classifier without adversarial weight (beta 0)",
          model={'granularity': "frame"}, beta=0.0, **_ADV),
    _cell("ADV_FRAME_B010", "frame-level adversarial, beta 0.1", model={'granularity': "frame"},
          beta=0.1, **_ADV),
    _cell("ADV_FRAME_B025", "frame-level adversarial, beta 0.25", model={'granularity': "frame"},
          beta=0.25, **_ADV),
    _cell("ADV_FRAME_B100", "frame-level adversarial, beta 1.0", model={'granularity': "frame"},
          beta=1.0, **_ADV),
]}


def cell_config(config: FoundTTSConfig, cell_spec: CellSpec) -> FoundTTSConfig:
    """Base config with one cell's overrides applied"""
    return ConfigLoader.from_dict(deep_merge(config.to_dict(), cell_spec.overrides))


def run_cell(config_dict: Dict[str, Any], name: str, manifest_path: str, output_dir: str) -> Dict[str, Any]:
    """
    Train and evaluate one cell; returns the checkpoint path and the report as a dict.

    Module-level so a process pool can pickle it.
    """
    cell_spec = CELLS[name]
    config = cell_config(ConfigLoader.from_dict(config_dict), cell_spec)
    manifest = load_manifest(manifest_path)
    cell_dir = Path(output_dir) / name
    save_config(config, cell_dir / "effective_config.yaml")

    trained = Trainer(config, system_id=name).train(manifest, cell_dir / "train")
    report = Evaluator(config).evaluate(trained.checkpoint, manifest, cell_dir / "eval")
    return {'checkpoint': str(trained.checkpoint), 'report': report.to_dict()}


class ExperimentPipeline:
    """
    Trains and evaluates matrix cells concurrently.

    `manifests` maps manifest keys to corpus directories; every cell uses
    "default" unless it names another key (cell F needs "snr8").
    """

    def __init__(
        self,
        config: FoundTTSConfig,
        manifest: Union[str, Path],
        output_dir: Union[str, Path],
        manifests: Optional[Dict[str, Union[str, Path]]] = None,
        workers: Optional[int] = None,
    ):
        self.config = config
        self.output_dir = Path(output_dir)
        self.manifests = {'default': str(manifest)}
        self.manifests.update({key: str(path) for key, path in (manifests or {}).items()})
        self.workers = workers or config.eval.workers
        self.logger = logging.getLogger(self.__class__.__name__)
        self._executor: Optional[Executor] = None
        self.logger.info(f"Experiment pipeline initialized ({self.workers} workers)")

    def _get_executor(self) -> Executor:
        if self._executor is None:
            if self.workers > 1:
                self._executor = ProcessPoolExecutor(max_workers=self.workers)
            else:
                self._executor = ThreadPoolExecutor(max_workers=1)
        return self._executor

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def _failed(self, name: str, error: Exception, elapsed: float = 0.0) -> CellResult:
        return CellResult(name=name, success=False, error_message=f"{type(error).__name__}: {error}",
                          elapsed_seconds=elapsed)

    async def process(self, name: str) -> CellResult:
        """
        Train and evaluate one cell.

        Failures (unknown cell, missing manifest override, training or
        evaluation errors) come back as a failed CellResult.
        """
        context = RunContext(output_dir=self.output_dir / name, seed=self.config.train.seed)
        self.logger.info(f"Starting cell {name}")
        try:
            cell_spec = CELLS.get(name)
            if cell_spec is None:
                raise ConfigError(f"Unknown matrix cell {name!r}; known: {', '.join(CELLS)}")
            manifest = self.manifests.get(cell_spec.manifest)
            if manifest is None:
                raise ConfigError(f"Cell {name} needs a '{cell_spec.manifest}' corpus (manifest override)")

            loop = asyncio.get_running_loop()
            outcome = await loop.run_in_executor(
                self._get_executor(), run_cell, self.config.to_dict(), name, manifest, str(self.output_dir)
            )
            execution_time = context.get_elapsed_time()
            self.logger.info(f"Cell {name} completed in {execution_time:.2f}s")
            return CellResult(
                name=name,
                success=True,
                report=EvalReport.from_dict(outcome['report']),
                checkpoint=outcome['checkpoint'],
                elapsed_seconds=execution_time,
            )
        except Exception as e:
            execution_time = context.get_elapsed_time()
            self.logger.error(f"Cell {name} failed after {execution_time:.2f}s: {str(e)}")
            return self._failed(name, e, execution_time)

    async def process_batch(self, names: List[str]) -> List[CellResult]:
        """Run several cells concurrently; one result per name, in order"""
        self.logger.info(f"Starting matrix of {len(names)} cells")
        tasks = [self.process(name) for name in names]

        # Execute all tasks concurrently, handling exceptions gracefully
        results = await asyncio.gather(*tasks, return_exceptions=True)

        processed_results = []
        for name, result in zip(names, results):
            if isinstance(result, BaseException):
                self.logger.error(f"Matrix cell {name} failed: {str(result)}")
                processed_results.append(self._failed(name, result))
            else:
                processed_results.append(result)

        succeeded = sum(r.success for r in processed_results)
        self.logger.info(f"Matrix completed: {succeeded}/{len(processed_results)} cells succeeded")
        return processed_results

    def write_comparison(self, results: List[CellResult]) -> Dict[str, Path]:
        """Write the comparison table as JSON and as aligned text"""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        json_path = self.output_dir / COMPARISON_JSON
        text_path = self.output_dir / COMPARISON_TEXT
        json_path.write_text(json.dumps(comparison_table(results), indent=2, sort_keys=True), encoding='utf-8')
        text_path.write_text(format_table(results), encoding='utf-8')
        return {'json': json_path, 'text': text_path}

    def get_pipeline_info(self) -> Dict[str, Any]:
        return {
            'cells': {name: cell_spec.description for name, cell_spec in CELLS.items()},
            'manifests': dict(self.manifests),
            'workers': self.workers,
            'output_dir': str(self.output_dir),
        }

    async def health_check(self) -> Dict[str, Any]:
        """Check that every configured corpus loads"""
        health: Dict[str, Any] = {'status': 'healthy', 'manifests': {}}
        for key, path in self.manifests.items():
            try:
                manifest = load_manifest(path)
                health['manifests'][key] = {'status': 'healthy', 'records': len(manifest.records)}
            except Exception as e:
                health['manifests'][key] = {'status': 'unhealthy', 'error': str(e)}
                health['status'] = 'degraded'
        return health


# ============================================================================
# COMPARISON TABLE
# ============================================================================

_COLUMNS = [
    ('system', lambda r: r.name),
    ('corpus_cer', lambda r: r.report.corpus_cer),
    ('mcd', lambda r: r.report.mcd_mean),
    ('mcd_noisy', lambda r: r.report.mcd_noisy_mean),
    ('cger', lambda r: r.report.cger_rate),
    ('monotonicity', lambda r: r.report.attention_monotonicity),
    ('truncated', lambda r: r.report.truncation_rate),
    ('probe_acc', lambda r: r.report.noise_probe_accuracy),
    ('perplexity', lambda r: r.report.codebook_perplexity),
    ('purity', lambda r: r.report.cluster_purity),
]


def comparison_table(results: List[CellResult]) -> Dict[str, Any]:
    return {
        'columns': [name for name, _ in _COLUMNS],
        'cells': [result.to_dict() for result in results],
    }


def _format_value(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def format_table(results: List[CellResult]) -> str:
    """Aligned plain-text table; failed cells show their error"""
    header = [name for name, _ in _COLUMNS]
    rows = []
    failures = []
    for result in results:
        if result.success and result.report is not None:
            rows.append([_format_value(get(result)) for _, get in _COLUMNS])
        else:
            rows.append([result.name, "FAILED"] + ["-"] * (len(header) - 2))
            failures.append(f"{result.name}: {result.error_message}")
    widths = [max(len(header[i]), *(len(row[i]) for row in rows)) if rows else len(header[i])
              for i in range(len(header))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * width for width in widths))
    for row in rows:
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
    if failures:
        lines.append("")
        lines.extend(failures)
    return "\n".join(lines) + "\n"
