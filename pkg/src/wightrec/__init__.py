"""Reconstruction of quantum field operators from Wightman functionals."""

__version__ = "0.1.0"
