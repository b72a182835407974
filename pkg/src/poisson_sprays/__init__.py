"""Symplectic realizations of Poisson structures via Poisson sprays."""

__version__ = "0.1.0"
