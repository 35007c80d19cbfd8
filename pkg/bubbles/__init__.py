"""Pseudospectral lab for multi-bubble blow-up of the mass-critical NLS with noise."""

__version__ = "2026.10.1"
