"""Render study-output CSV files as publication-style figure panels."""

__version__ = "0.1.0"

from .inputs import MissingInput, SchemaMismatch
from .panels import render

__all__ = ["MissingInput", "SchemaMismatch", "render"]
