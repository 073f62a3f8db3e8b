"""Randomized-measurement estimators for non-linear observables Tr(O rho^2)."""

__version__ = "0.1.0"
