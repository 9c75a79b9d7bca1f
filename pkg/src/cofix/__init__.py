"""Exact fixed-point checking over finite trees: lattices, folds, Kleene
iteration, probabilistic liveness witnesses and tree-automata invariants."""

__version__ = "0.1.0"
