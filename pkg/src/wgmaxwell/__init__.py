"""Weak Galerkin solvers for the 2D time-harmonic Maxwell saddle-point problems."""

__version__ = "0.1.0"
