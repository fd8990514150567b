"""Test package for the anti-piracy lab."""
