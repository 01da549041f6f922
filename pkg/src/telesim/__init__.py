"""Seeded Monte Carlo simulator and analytic oracle for photonic
teleportation onto a solid-state quantum memory."""

__version__ = "0.1.0"
