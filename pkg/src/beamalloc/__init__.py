"""Adaptive beam-frequency allocation for a single-cell mmWave downlink
with user position uncertainty."""

__version__ = "0.1.0"
