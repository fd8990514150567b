"""Unit tests for the anti-piracy lab."""
