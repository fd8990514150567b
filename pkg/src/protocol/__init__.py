"""The subspace-state proof system: instances, honest prover and verifier V*."""
