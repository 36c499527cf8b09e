# ============================================================================
# found_tts/corpus/io.py
# ============================================================================

"""
Corpus File Formats
===================

- Waveforms: mono 16-bit PCM WAV (soundfile).
- Transcripts: one UTF-8 text file per utterance, `<key>\\t<symbols>` lines
  where key is `golden` or a CER level such as `0.233`.
- Manifest: `manifest.jsonl`, one record per line, plus
  `manifest.meta.json` holding version, seed and the corpus config.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import soundfile as sf

from ..core.common import MANIFEST_VERSION, CorpusManifest, UtteranceRecord
from ..core.errors import CorpusIOError

__all__ = [
    'MANIFEST_NAME',
    'META_NAME',
    'write_wav',
    'read_wav',
    'write_transcripts',
    'read_transcripts',
    'write_manifest',
    'load_manifest',
]

MANIFEST_NAME = "manifest.jsonl"
META_NAME = "manifest.meta.json"


def write_wav(waveform: np.ndarray, path: Union[str, Path], sample_rate: int) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        sf.write(str(path), np.asarray(waveform, dtype=np.float64), sample_rate, subtype='PCM_16')
    except (RuntimeError, OSError) as e:
        raise CorpusIOError(f"Cannot write {path}: {e}") from e
    return path


def read_wav(path: Union[str, Path]) -> tuple:
    """Return (float64 samples, sample_rate)"""
    try:
        data, sample_rate = sf.read(str(path), dtype='float64')
    except (RuntimeError, OSError) as e:
        raise CorpusIOError(f"Cannot read {path}: {e}") from e
    if data.ndim != 1:
        data = data.mean(axis=1)
    return data, sample_rate


def write_transcripts(transcripts: Dict[str, List[str]], path: Union[str, Path]) -> Path:
    path = Path(path)
    lines = [f"{key}\t{' '.join(symbols)}\n" for key, symbols in transcripts.items()]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(lines), encoding="utf-8")
    except OSError as e:
        raise CorpusIOError(f"Cannot write {path}: {e}") from e
    return path


def read_transcripts(path: Union[str, Path]) -> Dict[str, List[str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CorpusIOError(f"Cannot read {path}: {e}") from e
    transcripts = {}
    for line in text.splitlines():
        key, _, symbols = line.partition("\t")
        transcripts[key] = symbols.split()
    return transcripts


def write_manifest(manifest: CorpusManifest, directory: Union[str, Path]) -> Path:
    """Single-writer manifest dump; records keep their input order"""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / MANIFEST_NAME, 'w', encoding='utf-8') as f:
            for record in manifest.records:
                f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        meta = {'version': manifest.version, 'seed': manifest.seed, 'config': manifest.config}
        (directory / META_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding='utf-8')
    except OSError as e:
        raise CorpusIOError(f"Cannot write manifest in {directory}: {e}") from e
    return directory / MANIFEST_NAME


def load_manifest(path: Union[str, Path], eval_size: Optional[int] = None) -> CorpusManifest:
    """Load a manifest (file or corpus directory) and re-check its invariants"""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        meta = json.loads((path.parent / META_NAME).read_text(encoding='utf-8'))
        with open(path, 'r', encoding='utf-8') as f:
            records = [UtteranceRecord.from_dict(json.loads(line)) for line in f if line.strip()]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CorpusIOError(f"Cannot load manifest {path}: {e}") from e

    if meta.get('version') != MANIFEST_VERSION:
        raise CorpusIOError(f"Manifest {path} has unsupported version {meta.get('version')}")

    manifest = CorpusManifest(
        version=meta['version'],
        seed=meta.get('seed', 0),
        records=records,
        root=path.parent,
        config=meta.get('config', {}),
    )
    if eval_size is None:
        eval_size = manifest.config.get('corpus', {}).get('eval_size')
    problems = manifest.validate(eval_size)
    if problems:
        raise CorpusIOError(f"Manifest {path} is invalid: {'; '.join(problems)}")
    return manifest
