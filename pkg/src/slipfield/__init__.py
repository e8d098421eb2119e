"""Incipient slip detection from tactile marker displacement fields."""

__version__ = "0.1.0"
