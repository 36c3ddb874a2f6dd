"""Chat-driven control stack for a simulated differential-drive robot."""

__version__ = "0.1.0"
