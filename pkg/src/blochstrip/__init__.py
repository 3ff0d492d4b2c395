"""Bloch band structure, radiation-condition evaluation and negative-refraction
prediction for 2D photonic-crystal strips."""

__version__ = "0.1.0"
