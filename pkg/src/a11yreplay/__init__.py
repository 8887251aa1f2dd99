"""Replay natural-language accessibility tests on a simulated iOS device."""

__version__ = "0.1.0"
