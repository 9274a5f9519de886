"""Primes at which fibres of conic bundles have no p-adic point, and the
random-walk statistics of their counting functions."""

__version__ = "0.1.0"
