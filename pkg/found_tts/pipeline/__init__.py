"""
found-tts training and evaluation: trainer, synthesizer, evaluation battery
and the experiment-matrix orchestrator.
"""

from .trainer import LOSS_LOG_NAME, TrainResult, Trainer, grl_strength
from .synthesizer import SYNTHESIS_INDEX, Synthesizer, read_synthesis, write_synthesis
from .evaluator import REPORT_NAME, Evaluator, NoiseProbe, eval_records, frame_labels, rescore_from_artifacts
from .pipeline import CELLS, CellSpec, ExperimentPipeline, comparison_table, format_table, run_cell

__all__ = [
    'LOSS_LOG_NAME',
    'TrainResult',
    'Trainer',
    'grl_strength',
    'SYNTHESIS_INDEX',
    'Synthesizer',
    'read_synthesis',
    'write_synthesis',
    'REPORT_NAME',
    'Evaluator',
    'NoiseProbe',
    'eval_records',
    'frame_labels',
    'rescore_from_artifacts',
    'CELLS',
    'CellSpec',
    'ExperimentPipeline',
    'comparison_table',
    'format_table',
    'run_cell',
]
