"""Certified asymptotic integration for x'' + f(t, x) = 0 on [t0, inf)."""

__version__ = "0.1.0"
