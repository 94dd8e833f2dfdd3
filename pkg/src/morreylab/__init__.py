"""Numerical laboratory for power-weighted Morrey spaces."""

__version__ = "0.1.0"
