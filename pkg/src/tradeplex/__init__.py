"""Multiplex analysis of commodity-layered trade networks."""

__version__ = "0.1.0"
