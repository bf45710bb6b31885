"""Inhomogeneous products of stochastic matrices and decentralized projected subgradient methods."""

__version__ = "0.1.0"
