"""Multi-level privilege control for behavior-based implicit authentication."""

__version__ = "0.1.0"
