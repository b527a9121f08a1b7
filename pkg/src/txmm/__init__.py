"""Checker, enumerator and synthesizer for transactional weak-memory models."""

__version__ = "0.1.0"
