"""Distortion bounds and Monte Carlo simulation for feedback-based analog source transmission."""

__version__ = "0.1.0"
