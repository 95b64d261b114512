"""Simulated blockchain for escrowed temporary-employment contracts."""

__version__ = "0.1.0"
