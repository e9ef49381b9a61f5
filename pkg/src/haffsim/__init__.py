"""DSMC simulation and diagnostics of cooling granular gases."""

__version__ = "0.1.0"
