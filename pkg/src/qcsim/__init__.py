"""Seeded simulator of quantum cryptographic protocols under implementation attacks."""

__version__ = "0.1.0"
