"""Numerical laboratory for anisotropic Besov-type norms and characteristic-function multipliers."""

__version__ = "1.0.0"
