"""Oscillation and zero interlacing for -(p y')' + q y = 0 with sign-indefinite p."""

__version__ = "0.1.0"
