"""Pseudo-spectral laboratory for the generalized intermediate NLS with nonvanishing background."""

__version__ = "0.1.0"
