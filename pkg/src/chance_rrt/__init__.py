"""Risk-bounded sampling-based motion planning under perception uncertainty."""

__version__ = "0.1.0"
