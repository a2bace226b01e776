"""Gradient-boosted oblivious trees with dual-importance feature selection."""

__version__ = "0.1.0"
