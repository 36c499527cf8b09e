"""
Synthetic found-data corpus: symbol inventory, rendering, noise mixing,
transcript corruption, template matching and corpus files.
"""

from .templates import PhonemeTemplate, Voice
from .inventory import BOUNDARY, EOS, SymbolInventory
from .render import render_utterance, render_waveform
from .corruption import CorruptionResult, TranscriptCorruptor, corrupt_transcript
from .noise import NoiseMix, generate_noise, load_noise_file, mix_noise
from .matcher import TemplateMatcher
from .io import load_manifest, read_transcripts, read_wav, write_manifest, write_wav
from .builder import CorpusBuilder, build_corpus, inventory_for_manifest, target_voice

__all__ = [
    'PhonemeTemplate',
    'Voice',
    'BOUNDARY',
    'EOS',
    'SymbolInventory',
    'render_utterance',
    'render_waveform',
    'CorruptionResult',
    'TranscriptCorruptor',
    'corrupt_transcript',
    'NoiseMix',
    'generate_noise',
    'load_noise_file',
    'mix_noise',
    'TemplateMatcher',
    'load_manifest',
    'read_transcripts',
    'read_wav',
    'write_manifest',
    'write_wav',
    'CorpusBuilder',
    'build_corpus',
    'inventory_for_manifest',
    'target_voice',
]
