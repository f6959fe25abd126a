"""Kinetic models of cognitive resource depletion fitted to question-answering logs."""

__version__ = "0.1.0"
