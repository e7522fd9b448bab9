"""Numerical laboratory for real principal type operators."""

__version__ = "0.1.0"
