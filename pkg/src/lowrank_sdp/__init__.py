"""Lifted semidefinite relaxations for rank-constrained quadratic problems."""

__version__ = "0.1.0"
