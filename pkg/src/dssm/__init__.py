"""Diagonal state space model kernels, spectra, and verification oracles."""

__version__ = "0.1.0"
