"""Dissipative SPT toolkit for the open cluster spin chain."""
