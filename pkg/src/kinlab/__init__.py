"""Numerical laboratory for the law of large numbers of kinetic interacting particles."""

__version__ = "0.1.0"
