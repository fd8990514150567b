"""Linear algebra over F_2."""
