"""
found-tts command line and self-check battery.
"""

from .main import build_parser, main
from .selfcheck import CheckResult, SelfCheck

__all__ = ['build_parser', 'main', 'CheckResult', 'SelfCheck']
