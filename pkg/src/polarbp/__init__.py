"""Polar code design by gradient descent through an unrolled BP decoder."""

__version__ = "0.1.0"
