"""Rank application objects by how much they gain from DRAM placement."""

__version__ = "0.1.0"
