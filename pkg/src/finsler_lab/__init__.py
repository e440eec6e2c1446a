"""Numerical toolkit for projective equivalence of Finsler metrics on surfaces."""

__version__ = "0.1.0"
