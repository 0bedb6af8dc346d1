"""Numeric laboratory for scalar-flat Kaehler metrics from the momentum construction."""

__version__ = "0.1.0"
