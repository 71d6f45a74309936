"""RIS-aided dual-function radar-communication optimization."""

__version__ = "0.1.0"
