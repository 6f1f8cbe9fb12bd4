"""Experiment presets, Monte Carlo runner and command-line interface."""
