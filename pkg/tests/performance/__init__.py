"""Runtime checks for the simulator and game."""
