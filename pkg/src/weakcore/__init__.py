"""Weak-core and α-core solvers and certifiers for normal-form games with
finitely many or a continuum of players."""

__version__ = "0.1.0"
