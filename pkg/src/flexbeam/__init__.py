"""Backstepping boundary control and simulation of flexible link-joints."""

__version__ = "0.1.0"
