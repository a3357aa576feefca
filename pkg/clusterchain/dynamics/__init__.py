"""Lindblad evolution and quantum-trajectory unravelling."""
