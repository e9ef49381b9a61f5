"""Command line interface for haffsim."""
