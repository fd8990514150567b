"""Batch experiment runner: configs, seeds, result files and reports."""
