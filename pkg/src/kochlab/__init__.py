"""Numerical laboratory for Kochergin special flows and their (T, T^-1) skew products."""

__version__ = "0.1.0"
