"""Numerical laboratory for random projections of high-dimensional vectors."""

__version__ = "0.1.0"
