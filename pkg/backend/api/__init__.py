"""API layer for scripts and embedding applications."""
