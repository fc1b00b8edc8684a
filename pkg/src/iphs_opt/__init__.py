"""Optimal control and turnpike analysis for irreversible port-Hamiltonian systems."""

__version__ = "0.1.0"
