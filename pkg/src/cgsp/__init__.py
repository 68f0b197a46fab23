"""Training-free cross-domain recommendation by graph signal processing."""

__version__ = "0.1.0"
