"""Desk-scale laboratory for predictive quantum learning of the hidden-parity
concept class, its unspeakability counting argument, and the one-way
communication conversions built around it."""

__version__ = "0.1.0"
