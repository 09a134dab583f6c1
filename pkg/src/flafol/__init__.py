"""Proof checking, proof transformation and trust auditing for an information-flow authorization logic."""

__version__ = "0.1.0"
