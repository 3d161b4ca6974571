"""Regularity and counting machinery for d-dimensional matrices over finite alphabets."""

__version__ = "0.1.0"
