"""Evolutionary search over LLM-written priority functions for combinatorial constructions."""

__version__ = "0.1.0"
