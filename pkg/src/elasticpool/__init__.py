"""Elastic object pools over a simulated cluster."""

__version__ = "0.1.0"
