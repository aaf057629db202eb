"""Profile wiki contributors from their edit histories and cluster them."""

__version__ = "0.1.0"
