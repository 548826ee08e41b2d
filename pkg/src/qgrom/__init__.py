"""Reduced-order modelling of a 3-layer QG double gyre with adaptive nudging."""

__version__ = "0.1.0"
