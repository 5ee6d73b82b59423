"""Steganography over a simulated lossy JPEG recompression channel."""
