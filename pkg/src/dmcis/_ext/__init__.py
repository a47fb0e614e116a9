"""Compiled numerical kernels (Cython). Optional; see :mod:`dmcis.kernels`."""
