"""Coral reef survey analysis: rugosity, height change, segmentation metrics, mesh texturing."""

__version__ = "0.1.0"
