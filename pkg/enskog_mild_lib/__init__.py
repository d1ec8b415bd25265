"""Enskog Mild - relativistic Enskog operator and mild-solution library."""

__version__ = "0.1.0"
