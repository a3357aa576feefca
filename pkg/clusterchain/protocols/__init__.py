"""Logical-qubit readout and restoration protocols."""
