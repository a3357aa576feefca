"""Pauli algebra, chain models and exact state-space numerics."""
