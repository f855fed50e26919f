"""Planar peg-in-hole joint design: contact modes, insertion graphs, stability and optimization."""
__version__ = "0.1.0"
