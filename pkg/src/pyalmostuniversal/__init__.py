"""Escalation lattices, local densities and exception sets of quadratic forms."""

__version__ = "0.1.0"
