"""Talbot-Lau interference of Mie spheres with optical gratings."""

__version__ = "0.1.0"
