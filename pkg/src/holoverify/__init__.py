"""Numerical certification of discrete holomorphicity and integrability identities."""

__version__ = "0.1.0"
