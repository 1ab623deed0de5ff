"""Helical Ginzburg-Landau vortex filaments: ansatz, norms and solvers."""

__version__ = "0.1.0"
