"""Simulator for faithful hyperentanglement purification with QD-cavity gadgets."""

__version__ = "0.1.0"
