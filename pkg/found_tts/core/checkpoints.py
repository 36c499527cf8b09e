# ============================================================================
# found_tts/core/checkpoints.py
# ============================================================================

"""
Checkpoint Container and Store
==============================

Single-file checkpoint format:

    magic      8 bytes   b"FTTSCKPT"
    version    uint32    little-endian
    hdr_len    uint64    little-endian
    header     hdr_len bytes of UTF-8 JSON
    payload    little-endian float32 arrays, row-major, back to back

The header carries the model and train configs, step, loss summary, one index
entry per parameter (name, shape, byte offset, original dtype) and the SHA-256
of the payload. Anything that does not match on read raises
CheckpointIntegrityError.
"""

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Any, Union

import numpy as np

from .errors import CheckpointIntegrityError, CorpusIOError

__all__ = [
    'CHECKPOINT_MAGIC',
    'CHECKPOINT_VERSION',
    'Checkpoint',
    'write_checkpoint',
    'read_checkpoint',
    'CheckpointStore',
]

CHECKPOINT_MAGIC = b"FTTSCKPT"
CHECKPOINT_VERSION = 1
_PREAMBLE = struct.Struct("<8sIQ")
_LE_F32 = np.dtype("<f4")


@dataclass
class Checkpoint:
    """In-memory checkpoint: header metadata plus named arrays"""
    arrays: Dict[str, np.ndarray]
    step: int = 0
    model_config: Dict[str, Any] = field(default_factory=dict)
    train_config: Dict[str, Any] = field(default_factory=dict)
    loss_summary: Dict[str, float] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)
    path: Optional[Path] = None


def write_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    """Serialize a checkpoint to one file"""
    path = Path(path)
    index = []
    chunks = []
    offset = 0
    for name in sorted(checkpoint.arrays):
        array = np.asarray(checkpoint.arrays[name])
        data = np.ascontiguousarray(array, dtype=_LE_F32).tobytes()
        index.append({
            'name': name,
            'shape': list(array.shape),
            'offset': offset,
            'dtype': str(array.dtype),
        })
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)

    header = {
        'format_version': CHECKPOINT_VERSION,
        'step': int(checkpoint.step),
        'model_config': checkpoint.model_config,
        'train_config': checkpoint.train_config,
        'loss_summary': checkpoint.loss_summary,
        'extra': checkpoint.extra,
        'params': index,
        'payload_bytes': len(payload),
        'payload_sha256': hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, 'wb') as f:
            f.write(_PREAMBLE.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes)))
            f.write(header_bytes)
            f.write(payload)
        tmp.replace(path)
    except OSError as e:
        raise CorpusIOError(f"Cannot write checkpoint {path}: {e}") from e
    return path


def read_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Parse and verify a checkpoint file"""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointIntegrityError(f"Cannot read checkpoint {path}: {e}") from e

    if len(blob) < _PREAMBLE.size:
        raise CheckpointIntegrityError(f"{path}: truncated preamble")
    magic, version, header_len = _PREAMBLE.unpack_from(blob, 0)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointIntegrityError(f"{path}: not a found-tts checkpoint")
    if version != CHECKPOINT_VERSION:
        raise CheckpointIntegrityError(f"{path}: unsupported format version {version}")

    start = _PREAMBLE.size
    if len(blob) < start + header_len:
        raise CheckpointIntegrityError(f"{path}: truncated header")
    try:
        header = json.loads(blob[start:start + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointIntegrityError(f"{path}: corrupt header ({e})") from e

    payload = blob[start + header_len:]
    if len(payload) != header.get('payload_bytes'):
        raise CheckpointIntegrityError(
            f"{path}: payload is {len(payload)} bytes, header says {header.get('payload_bytes')}"
        )
    if hashlib.sha256(payload).hexdigest() != header.get('payload_sha256'):
        raise CheckpointIntegrityError(f"{path}: payload checksum mismatch")

    arrays: Dict[str, np.ndarray] = {}
    for entry in header.get('params', []):
        shape = tuple(entry['shape'])
        count = int(np.prod(shape)) if shape else 1
        begin = entry['offset']
        end = begin + count * _LE_F32.itemsize
        if end > len(payload):
            raise CheckpointIntegrityError(f"{path}: parameter {entry['name']} out of bounds")
        values = np.frombuffer(payload[begin:end], dtype=_LE_F32).reshape(shape)
        arrays[entry['name']] = values.astype(np.dtype(entry.get('dtype', 'float32')))

    return Checkpoint(
        arrays=arrays,
        step=header.get('step', 0),
        model_config=header.get('model_config', {}),
        train_config=header.get('train_config', {}),
        loss_summary=header.get('loss_summary', {}),
        extra=header.get('extra', {}),
        path=path,
    )


class CheckpointStore:
    """Manages the checkpoint directory of one training run"""

    SUFFIX = ".ftts"

    def __init__(self, directory: Union[str, Path], keep: Optional[int] = None):
        self.directory = Path(directory)
        self.keep = keep
        self.logger = logging.getLogger(self.__class__.__name__)

    def path_for(self, step: int) -> Path:
        return self.directory / f"ckpt_{step:08d}{self.SUFFIX}"

    def save(self, checkpoint: Checkpoint) -> Path:
        """Write a checkpoint and prune old ones beyond `keep`"""
        path = write_checkpoint(checkpoint, self.path_for(checkpoint.step))
        checkpoint.path = path
        self.logger.info(f"Saved checkpoint: {path.name} (step {checkpoint.step})")
        self._prune()
        return path

    def load(self, path: Optional[Union[str, Path]] = None) -> Checkpoint:
        """Load a checkpoint by path, or the latest one"""
        target = Path(path) if path is not None else self.latest()
        if target is None:
            raise CheckpointIntegrityError(f"No checkpoints in {self.directory}")
        return read_checkpoint(target)

    def list_checkpoints(self) -> List[Path]:
        """List checkpoint files ordered by step"""
        if not self.directory.exists():
            return []
        return sorted(self.directory.glob(f"ckpt_*{self.SUFFIX}"))

    def latest(self) -> Optional[Path]:
        checkpoints = self.list_checkpoints()
        return checkpoints[-1] if checkpoints else None

    def _prune(self):
        if not self.keep:
            return
        for stale in self.list_checkpoints()[:-self.keep]:
            stale.unlink()
            self.logger.debug(f"Pruned checkpoint: {stale.name}")
