"""Candidate anti-piracy proof for NP: relations, oracle handles, trusted setup."""
