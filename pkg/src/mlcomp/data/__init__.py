"""Bundled corpus programs and platform files."""
