"""Numerical workbench for conformal parametrizations of gravitational initial data."""

__version__ = "0.1.0"
