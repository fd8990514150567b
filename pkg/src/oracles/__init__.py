"""Membership oracles, verifier programs and oracle-replacement hybrids."""
