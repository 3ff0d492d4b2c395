"""Rendering of blochstrip artifacts: band diagrams, isofrequency contours,
Bloch-measure maps, radiation-metric decay and field magnitudes.

This package never recomputes physics; it draws the documented CSV/JSON file
contracts exactly as written by the solver CLI.
"""

__version__ = "0.1.0"
