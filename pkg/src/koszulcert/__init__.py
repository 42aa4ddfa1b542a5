"""Exact Koszul cohomology of line bundles on nodal curves, with vanishing certificates."""

__version__ = "0.1.0"
