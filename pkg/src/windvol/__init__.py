"""Spatiotemporal wind-speed volatility modelling across a station network."""

__version__ = "0.1.0"
