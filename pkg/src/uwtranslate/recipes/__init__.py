"""Packaged per-method training recipes."""
