# ============================================================================
# tests/__init__.py
# ============================================================================

"""
found-tts Test Suite
====================

Tests for the corpus generator, models, pipeline and command line.
"""

__version__ = "0.1.0"
