"""Learned performance estimation and phase ordering for a miniature compiler."""

__version__ = "0.1.0"
