"""Piracy game harness, pirate strategies and counterfeiting experiments."""
