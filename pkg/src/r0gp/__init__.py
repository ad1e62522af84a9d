"""Basic reproduction number characterizations and GP-based resource allocation."""

__version__ = "0.1.0"
