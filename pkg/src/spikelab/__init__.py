"""Spike replication and nucleation thresholds for 1-D reaction-diffusion systems."""

__version__ = "0.1.0"
