"""Lowest eigenvalue of the magnetic Neumann Laplacian on multiply connected planar domains."""

__version__ = "1.0.0"
