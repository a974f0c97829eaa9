"""Finite element complexes with trace structures, checked in exact arithmetic."""

__version__ = "0.1.0"
