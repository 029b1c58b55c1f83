"""Exact and approximate Shapley values for dataset valuation games."""

__version__ = "0.1.0"
