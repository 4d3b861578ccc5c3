"""Attributed tree transducers with monadic output: evaluation, analysis,
and decision procedures for top-down definability."""

__version__ = "0.1.0"
