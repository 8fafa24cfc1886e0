"""Discretized geodesic metric spaces and hyperbolic-type path classifiers."""

__version__ = "0.1.0"
