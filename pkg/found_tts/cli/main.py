# =============================================================================
# found_tts/cli/main.py
# =============================================================================

"""
found-tts command line: corpus generation, training, synthesis, evaluation,
the experiment matrix and the self-check battery.

Human-readable logs go to stderr; stdout carries one JSON summary per command.
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from ..core.config import ConfigLoader, FoundTTSConfig, deep_merge, save_config
from ..core.errors import ConfigError, CorpusIOError, FoundTTSError

logger = logging.getLogger("found_tts")

EFFECTIVE_CONFIG = "effective_config.yaml"

# flag -> (section, key)
_FLAG_OVERRIDES = {
    'mode': ('train', 'mode'),
    'cer_level': ('train', 'cer_level'),
    'audio_source': ('train', 'audio_source'),
    'use_auxiliary': ('train', 'use_auxiliary'),
    'beta': ('train', 'beta'),
    'max_steps': ('train', 'max_steps'),
    'batch_size': ('train', 'batch_size'),
    'attention': ('model', 'attention'),
    'granularity': ('model', 'granularity'),
    'stop_threshold': ('eval', 'stop_threshold'),
    'max_eval_utterances': ('eval', 'max_eval_utterances'),
}


def setup_logging(level: str):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
        force=True,
    )


def _parse_set(values: Optional[List[str]]) -> Dict[str, Any]:
    """`section.key=value` pairs into a nested override dict"""
    overrides: Dict[str, Any] = {}
    for item in values or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        path = [p for p in dotted.strip().split(".") if p]
        if not path:
            raise ConfigError(f"--set has an empty key in {item!r}")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        node = overrides
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return overrides


def _cell_overrides(cell: Optional[str]) -> Dict[str, Any]:
    if not cell:
        return {}
    from ..pipeline.pipeline import CELLS

    if cell not in CELLS:
        raise ConfigError(f"--cell: unknown cell {cell!r}; known: {', '.join(CELLS)}")
    return CELLS[cell].overrides


def load_config(args: argparse.Namespace) -> FoundTTSConfig:
    """Layered config: file < environment < --cell < --set < dedicated flags"""
    overrides = deep_merge(_cell_overrides(getattr(args, 'cell', None)), _parse_set(getattr(args, 'set', None)))
    for flag, (section, key) in _FLAG_OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides = deep_merge(overrides, {section: {key: value}})
    if getattr(args, 'seed', None) is not None:
        overrides = deep_merge(overrides, {'train': {'seed': args.seed}})
    if getattr(args, 'workers', None) is not None:
        overrides = deep_merge(overrides, {'corpus': {'workers': args.workers}, 'eval': {'workers': args.workers}})
    if getattr(args, 'log_level', None):
        overrides['log_level'] = args.log_level
    return ConfigLoader.load(getattr(args, 'config', None), overrides)


def prepare_output(path: Path, force: bool) -> Path:
    """Refuse to reuse a non-empty output directory unless forced"""
    if path.exists() and any(path.iterdir()) and not force:
        raise CorpusIOError(f"Output directory {path} is not empty (use --force to overwrite)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def emit(payload: Dict[str, Any]):
    sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    sys.stdout.flush()


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_gen_corpus(args: argparse.Namespace, config: FoundTTSConfig) -> int:
    from ..corpus.builder import build_corpus

    out = Path(args.out)
    manifest = build_corpus(config, args.seed or 0, out, force=args.force)
    save_config(config, out / EFFECTIVE_CONFIG)
    emit({'manifest': str(out), 'records': len(manifest.records), 'labels': manifest.label_counts(),
          'corruption': manifest.config.get('corruption', {})})
    return 0


def cmd_train(args: argparse.Namespace, config: FoundTTSConfig) -> int:
    from ..corpus.io import load_manifest
    from ..pipeline.trainer import Trainer

    manifest = load_manifest(args.corpus)
    out = prepare_output(Path(args.out), args.force)
    save_config(config, out / EFFECTIVE_CONFIG)
    result = Trainer(config, system_id=args.cell or args.system_id).train(manifest, out)
    emit(result.to_dict())
    return 0


def cmd_synth(args: argparse.Namespace, config: FoundTTSConfig) -> int:
    from ..core.common import NoiseCondition
    from ..dsp.features import write_mel
    from ..pipeline.synthesizer import Synthesizer

    synthesizer = Synthesizer.from_checkpoint(args.checkpoint, config.eval)
    symbols = args.text.split()
    if not symbols:
        raise ConfigError("--text: empty symbol sequence")
    try:
        result = synthesizer.synthesize(symbols, speaker=args.speaker, condition=NoiseCondition(args.condition))
    except ValueError as e:
        raise ConfigError(f"--text: {e}") from e
    out = Path(args.out)
    write_mel(result.mel, out)

    decoded = None
    if args.corpus:
        from ..corpus.builder import inventory_for_manifest, target_voice
        from ..corpus.io import load_manifest
        from ..corpus.matcher import TemplateMatcher

        manifest = load_manifest(args.corpus)
        inventory = inventory_for_manifest(manifest)
        matcher = TemplateMatcher(inventory, target_voice(manifest, inventory),
                                  config.eval.silence_log_power, config.eval.min_run_frames)
        decoded = matcher.decode(result.mel)
    emit({'mel': str(out), 'frames': result.mel.n_frames, 'stop_step': result.stop_step,
          'truncated': result.truncated, 'decoded': decoded})
    return 0


def cmd_eval(args: argparse.Namespace, config: FoundTTSConfig) -> int:
    from ..corpus.io import load_manifest
    from ..pipeline.evaluator import Evaluator, rescore_from_artifacts

    manifest = load_manifest(args.corpus)
    if args.rescore:
        report = rescore_from_artifacts(args.rescore, manifest, config.eval)
    else:
        if not args.checkpoint:
            raise ConfigError("eval needs --checkpoint (or --rescore DIR)")
        out = prepare_output(Path(args.out), args.force)
        save_config(config, out / EFFECTIVE_CONFIG)
        report = Evaluator(config).evaluate(args.checkpoint, manifest, out, probe=not args.no_probe)
    emit(report.to_dict())
    return 0


def _manifest_overrides(values: Optional[List[str]]) -> Dict[str, str]:
    overrides = {}
    for item in values or []:
        if "=" not in item:
            raise ConfigError(f"--manifest-override expects key=path, got {item!r}")
        key, path = item.split("=", 1)
        overrides[key.strip()] = path.strip()
    return overrides


def cmd_matrix(args: argparse.Namespace, config: FoundTTSConfig) -> int:
    from ..pipeline.pipeline import ExperimentPipeline

    cells = [c.strip() for c in args.cells.split(",") if c.strip()] if args.cells else list(config.eval.cells)
    out = prepare_output(Path(args.out), args.force)
    save_config(config, out / EFFECTIVE_CONFIG)
    pipeline = ExperimentPipeline(config, args.corpus, out, _manifest_overrides(args.manifest_override),
                                  workers=args.workers)
    try:
        results = asyncio.run(pipeline.process_batch(cells))
    finally:
        pipeline.close()
    paths = pipeline.write_comparison(results)
    sys.stderr.write(paths['text'].read_text(encoding='utf-8'))
    emit({'cells': [r.to_dict() for r in results], 'comparison': {k: str(v) for k, v in paths.items()}})
    return 0 if all(r.success for r in results) else 1


def cmd_selfcheck(args: argparse.Namespace, config: FoundTTSConfig) -> int:
    from .selfcheck import SelfCheck

    check = SelfCheck(seed=args.seed or 0, quick=args.quick)
    report = check.report(check.run())
    emit(report)
    return 0 if report['passed'] else 1


# ============================================================================
# PARSER
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML or JSON config file')
    common.add_argument('--seed', type=int, help='Random seed')
    common.add_argument('--set', action='append', metavar='SECTION.KEY=VALUE',
                        help='Override any config value (repeatable)')
    common.add_argument('--workers', type=int, help='Parallel workers')
    common.add_argument('--force', action='store_true', help='Overwrite an existing output directory')

    parser = argparse.ArgumentParser(
        prog='found-tts',
        description='Sequence-to-sequence TTS on imperfect found data',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  found-tts gen-corpus --config configs/toy.yaml --out runs/corpus --seed 0
  found-tts train --corpus runs/corpus --cell D --out runs/D
  found-tts eval --corpus runs/corpus --checkpoint runs/D/checkpoints/ckpt_00020000.ftts --out runs/D/eval
  found-tts matrix --corpus runs/corpus --cells A,D,VQVAE_D,H,ADV_FRAME --out runs/matrix
  found-tts selfcheck
        """,
    )
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING or ERROR')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen-corpus', parents=[common], help='Generate the synthetic corpus')
    gen.add_argument('--out', required=True, help='Corpus directory')
    gen.set_defaults(handler=cmd_gen_corpus)

    train = sub.add_parser('train', parents=[common], help='Train one system')
    train.add_argument('--corpus', required=True, help='Corpus directory or manifest')
    train.add_argument('--out', required=True, help='Run directory')
    train.add_argument('--cell', help='Apply a named matrix cell (A, D, VQVAE_D, ADV_FRAME, ...)')
    train.add_argument('--system-id', default='system', help='Name recorded in the checkpoint')
    train.add_argument('--mode', choices=['baseline', 'vq', 'adversarial', 'both'])
    train.add_argument('--cer-level', type=float)
    train.add_argument('--audio-source', choices=['clean', 'noisy'])
    train.add_argument('--use-auxiliary', action='store_true', default=None)
    train.add_argument('--beta', type=float)
    train.add_argument('--max-steps', type=int)
    train.add_argument('--batch-size', type=int)
    train.add_argument('--attention', choices=['gmm', 'lsa'])
    train.add_argument('--granularity', choices=['frame', 'sentence'])
    train.set_defaults(handler=cmd_train)

    synth = sub.add_parser('synth', parents=[common], help='Synthesize a mel for a symbol sequence')
    synth.add_argument('--checkpoint', required=True)
    synth.add_argument('--text', required=True, help='Space-separated symbols, e.g. "s1 s2 s3"')
    synth.add_argument('--condition', choices=['clean', 'noisy'], default='clean')
    synth.add_argument('--speaker', default=None, help='Speaker name (defaults to the first)')
    synth.add_argument('--corpus', help='Corpus to decode the output against')
    synth.add_argument('--out', required=True, help='Output mel file')
    synth.set_defaults(handler=cmd_synth)

    evaluate = sub.add_parser('eval', parents=[common], help='Evaluate a checkpoint on the eval split')
    evaluate.add_argument('--corpus', required=True)
    evaluate.add_argument('--checkpoint')
    evaluate.add_argument('--out', default='eval')
    evaluate.add_argument('--rescore', metavar='SYNTH_DIR', help='Recompute a report from written artifacts')
    evaluate.add_argument('--no-probe', action='store_true', help='Skip the noise probe')
    evaluate.add_argument('--stop-threshold', type=float)
    evaluate.add_argument('--max-eval-utterances', type=int)
    evaluate.set_defaults(handler=cmd_eval)

    matrix = sub.add_parser('matrix', parents=[common], help='Train and evaluate several cells')
    matrix.add_argument('--corpus', required=True)
    matrix.add_argument('--out', required=True)
    matrix.add_argument('--cells', help='Comma-separated cell names (default: eval.cells)')
    matrix.add_argument('--manifest-override', action='append', metavar='KEY=PATH',
                        help='Extra corpus for cells that need one, e.g. snr8=runs/corpus8')
    matrix.add_argument('--max-steps', type=int)
    matrix.set_defaults(handler=cmd_matrix)

    selfcheck = sub.add_parser('selfcheck', parents=[common], help='Run the self-check battery')
    selfcheck.add_argument('--quick', action='store_true', help='Fewer random draws')
    selfcheck.set_defaults(handler=cmd_selfcheck)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level or "INFO")
    try:
        config = load_config(args)
        setup_logging(config.log_level)
        return args.handler(args, config)
    except FoundTTSError as e:
        logger.error(str(e))
        return e.exit_code
    except KeyboardInterrupt:
        logger.error("Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
