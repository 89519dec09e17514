"""Numerical laboratory for tube-measure and concentration inequalities of Laplace eigenfunctions."""

__version__ = "0.1.0"
