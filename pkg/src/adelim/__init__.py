"""Adiabatic elimination for composite Lindblad systems."""

__version__ = "0.1.0"
