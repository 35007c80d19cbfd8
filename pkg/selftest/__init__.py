"""Kernel-identity and conservation self-checks."""
