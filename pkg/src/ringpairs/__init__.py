"""Microring SFWM photon-pair source simulator and time-tag correlation toolkit."""

__version__ = "0.1.0"
