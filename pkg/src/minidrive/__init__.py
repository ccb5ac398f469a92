"""Minimalist driving stack: flat vehicle model, minimum-jerk planning,
BEV rasterization, closed-loop simulation, and evaluation metrics."""

__version__ = "0.1.0"
