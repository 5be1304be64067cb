"""Numerical laboratory for Landau Hamiltonians on Euclidean and hyperbolic (half-)planes."""

__version__ = "0.1.0"
