"""Poincaré constants and heat decay on manifolds with ends: symbolic predictions and radial-graph numerics."""

__version__ = "0.1.0"
