"""Spectral, perturbative and entanglement analysis."""
