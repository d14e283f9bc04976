"""Structured-light 3D mosaicing of endoscopic-style image sequences."""

__version__ = "0.1.0"
