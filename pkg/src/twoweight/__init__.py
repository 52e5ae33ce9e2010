"""Numerical testbed for the two weight inequality of the Hilbert transform on atomic measures."""
from .dyadic import DyadicInterval, GridConfig
from .measure import DiscreteMeasure, Interval

__all__ = ["DiscreteMeasure", "DyadicInterval", "GridConfig", "Interval"]
__version__ = "0.1.0"
