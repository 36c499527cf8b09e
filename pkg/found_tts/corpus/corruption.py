# ============================================================================
# found_tts/corpus/corruption.py
# ============================================================================

"""
Transcript Corruption
=====================

Simulated recognizer errors: substitutions (biased towards the most
confusable template), deletions and insertions at uniformly drawn positions.
Short utterances cannot hit arbitrary rates, so the corpus-level target is
met by error diffusion across utterances (TranscriptCorruptor).
"""

import logging
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

from ..dsp.metrics import levenshtein
from .inventory import BOUNDARY, SymbolInventory

__all__ = [
    'CorruptionResult',
    'corrupt_transcript',
    'TranscriptCorruptor',
    'SUBSTITUTE',
    'DELETE',
    'INSERT',
]

SUBSTITUTE, DELETE, INSERT = 0, 1, 2
_MIN_REACHABLE_LENGTH = 5
_NEAREST_PROB = 0.5


class CorruptionResult(NamedTuple):
    symbols: List[str]
    achieved_cer: float
    target_reachable: bool
    errors: int


def _check_mix(mix: Sequence[float]) -> np.ndarray:
    probs = np.asarray(mix, dtype=np.float64)
    if probs.shape != (3,) or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-6:
        raise ValueError(f"Edit mix must be three non-negative weights summing to 1, got {list(mix)}")
    return probs / probs.sum()


def corrupt_transcript(
    symbols: Sequence[str],
    target_cer: float,
    mix: Sequence[float] = (0.5, 0.3, 0.2),
    seed: Union[int, Sequence[int], np.random.Generator] = 0,
    inventory: Optional[SymbolInventory] = None,
    drop_boundaries: bool = False,
    n_edits: Optional[int] = None,
) -> CorruptionResult:
    """
    Corrupt a symbol sequence towards a target character error rate.

    Args:
        symbols: Reference sequence
        target_cer: Desired rate in [0, 1)
        mix: Probabilities of (substitution, deletion, insertion)
        seed: Seed or generator
        inventory: Supplies the phoneme alphabet and confusable neighbours
        drop_boundaries: Steer deletions onto word boundaries first
        n_edits: Explicit edit count, overriding round(target_cer * N)

    Returns:
        CorruptionResult with the achieved rate recomputed by Levenshtein
    """
    if not 0.0 <= target_cer < 1.0:
        raise ValueError(f"target_cer must be in [0, 1), got {target_cer}")
    probs = _check_mix(mix)
    reference = list(symbols)
    length = len(reference)
    reachable = target_cer == 0.0 or length >= _MIN_REACHABLE_LENGTH

    count = int(round(target_cer * length)) if n_edits is None else int(n_edits)
    count = max(0, min(count, length))
    if count == 0:
        return CorruptionResult(reference, 0.0, reachable, 0)

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if inventory is not None:
        alphabet = list(inventory.phonemes)
    else:
        alphabet = sorted({s for s in reference if s != BOUNDARY})

    positions = [int(p) for p in rng.choice(length, size=count, replace=False)]
    kinds = [int(k) for k in rng.choice(3, size=count, p=probs)]
    edits = dict(zip(positions, kinds))

    if drop_boundaries:
        spare = [i for i, s in enumerate(reference) if s == BOUNDARY and i not in edits]
        for position in sorted(edits):
            if not spare:
                break
            if edits[position] == DELETE and reference[position] != BOUNDARY:
                del edits[position]
                edits[spare.pop(0)] = DELETE

    def pick(exclude: set) -> str:
        choices = [s for s in alphabet if s not in exclude] or alphabet
        return choices[int(rng.integers(len(choices)))]

    output: List[str] = []
    for i, symbol in enumerate(reference):
        kind = edits.get(i)
        if kind == SUBSTITUTE:
            nearest = inventory.nearest(symbol) if inventory is not None else None
            if nearest is not None and rng.random() < _NEAREST_PROB:
                output.append(nearest)
            else:
                output.append(pick({symbol}))
        elif kind == DELETE:
            continue
        elif kind == INSERT:
            previous = output[-1] if output else None
            output.append(pick({symbol, previous}))
            output.append(symbol)
        else:
            output.append(symbol)

    summary = levenshtein(reference, output)
    return CorruptionResult(output, summary.cer, reachable, summary.errors)


class TranscriptCorruptor:
    """Corpus-level corruption with error diffusion across utterances"""

    def __init__(
        self,
        target_cer: float,
        mix: Sequence[float] = (0.5, 0.3, 0.2),
        inventory: Optional[SymbolInventory] = None,
        drop_boundaries: bool = False,
    ):
        if not 0.0 <= target_cer < 1.0:
            raise ValueError(f"target_cer must be in [0, 1), got {target_cer}")
        _check_mix(mix)
        self.target_cer = target_cer
        self.mix = tuple(mix)
        self.inventory = inventory
        self.drop_boundaries = drop_boundaries
        self.carry = 0.0
        self.total_errors = 0
        self.total_reference = 0
        self.unreachable = 0
        self.logger = logging.getLogger(self.__class__.__name__)

    def corrupt(self, symbols: Sequence[str], rng: np.random.Generator) -> CorruptionResult:
        length = len(symbols)
        desired = self.target_cer * length + self.carry
        n_edits = max(0, min(length, int(round(desired))))
        result = corrupt_transcript(
            symbols, self.target_cer, self.mix, rng, self.inventory,
            self.drop_boundaries, n_edits=n_edits,
        )
        self.carry = desired - result.errors
        self.total_errors += result.errors
        self.total_reference += length
        if not result.target_reachable:
            self.unreachable += 1
        return result

    @property
    def corpus_cer(self) -> float:
        if self.total_reference == 0:
            return 0.0
        return self.total_errors / self.total_reference

    def summary(self) -> dict:
        return {
            'target_cer': self.target_cer,
            'achieved_cer': self.corpus_cer,
            'reference_symbols': self.total_reference,
            'unreachable_utterances': self.unreachable,
        }
