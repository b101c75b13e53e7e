"""Compiled path-enumeration kernels (Cython). Optional; see ``longsync.kernels``."""
