"""Hybrid classical-quantum image classifier with an exactly simulated 4-qubit circuit."""

__version__ = "0.1.0"
