"""Metrics, oracles, evaluation harness and sweeps."""
