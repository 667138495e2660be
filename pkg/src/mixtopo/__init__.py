"""Anonymity of mix networks laid over unstructured topologies."""

__version__ = "0.1.0"
