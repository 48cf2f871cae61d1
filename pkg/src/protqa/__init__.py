"""Protein QA: early fusion of structure, sequence and question text."""

__version__ = "0.1.0"
