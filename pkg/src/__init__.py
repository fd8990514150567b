"""Anti-piracy lab source package."""
