"""Eigenbases of weight-1 newform spaces by Hecke stability over a prime field."""

__version__ = "0.1.0"
