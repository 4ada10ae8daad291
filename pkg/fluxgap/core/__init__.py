"""Core utilities: typed errors, retry, the shared worker pool."""
