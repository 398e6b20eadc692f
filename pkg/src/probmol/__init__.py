"""Probabilistic surrogate benchmarks for small molecular datasets."""
__version__ = "0.1.0"
