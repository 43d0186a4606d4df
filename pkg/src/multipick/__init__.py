"""Seeded simulator and benchmark harness for multi-item produce picking."""

__version__ = "0.1.0"
