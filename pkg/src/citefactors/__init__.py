"""Scholarly-corpus factor extraction and h-index forecasting toolkit."""

__version__ = "0.1.0"
