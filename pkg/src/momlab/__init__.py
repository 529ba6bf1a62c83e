"""Numerics for moments of primes in arithmetic progressions and their zero-sum expansions."""

__version__ = "0.1.0"
