"""Numerical laboratory for waist inequalities, radial transport and Minkowski content."""

__version__ = "0.1.0"
