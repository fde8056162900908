"""Constructions of almost-minimizing multi-sheeted graphs and their numerical certification."""

__version__ = "0.1.0"
