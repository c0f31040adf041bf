"""Randomized branching for parameterized approximation of Vertex Cover and 3-Hitting Set."""

__version__ = "0.1.0"
