"""Massive-MIMO link-level simulation and coverage planning for high-tower rural base stations."""

__version__ = "0.1.0"
