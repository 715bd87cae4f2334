"""Spectral space-time Galerkin solver for the regularized time-periodic
compressible Navier-Stokes-Fourier scheme, with balance auditors."""

__version__ = "0.1.0"
