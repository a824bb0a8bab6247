"""Quantity-aware search over scientific tables."""

__version__ = "0.1.0"
