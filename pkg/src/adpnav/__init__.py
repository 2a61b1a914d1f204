"""Adaptive dynamics planning for 2D differential-drive navigation."""

__version__ = "0.1.0"
