"""Explicit rates of metastability for Cesaro means of nonexpansive maps."""

__version__ = "0.1.0"
