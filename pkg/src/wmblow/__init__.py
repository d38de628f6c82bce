"""Numerical laboratory for corotational wave maps above the energy-critical dimension."""

__version__ = "0.1.0"
