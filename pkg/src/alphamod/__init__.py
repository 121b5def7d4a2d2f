"""Numerical toolkit for alpha-modulation spaces and fractional Schroedinger flows."""

__version__ = "0.1.0"
