"""Inductive invariants in linear integer arithmetic for counter-machine reductions."""

__version__ = "0.1.0"
