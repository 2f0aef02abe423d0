"""Simulator for EPR-pair key distribution with built-in authentication."""

__version__ = "0.1.0"
