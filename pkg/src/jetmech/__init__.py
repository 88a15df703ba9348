"""Tulczyjew triples for time-dependent Lagrangian and Hamiltonian mechanics."""
from __future__ import annotations

__version__ = "0.1.0"
