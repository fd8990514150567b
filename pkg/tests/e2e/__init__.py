"""End-to-end CLI scenarios."""
