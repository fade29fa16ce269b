"""Asynchronous majority dynamics on graphs: simulation, exact analysis, verification."""

__version__ = "0.1.0"
