"""Simulated manipulation stack: devices, teleop, recording, deployment, eval."""

__version__ = "0.1.0"
