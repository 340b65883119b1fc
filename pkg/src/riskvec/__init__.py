"""Paragraph-vector embeddings and per-category risk classification for legal text."""

__version__ = "0.1.0"
