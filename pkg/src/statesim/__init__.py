"""Exact statevector simulation and accept operators."""
