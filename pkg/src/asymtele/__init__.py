"""Simulation of the (2, 2, 4) asymmetric entangled state and qubit/ququart teleportation."""

__version__ = "0.1.0"
