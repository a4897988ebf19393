"""Differential forms on grids, homogeneous kernels, and L^1 primitives of closed forms."""

__version__ = "0.1.0"
