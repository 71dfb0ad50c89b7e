"""Privacy accounting and simulation tools for user-level DP-SGD."""

__version__ = "0.1.0"
