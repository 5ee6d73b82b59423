"""Baseline JPEG access at the quantized DCT coefficient level."""

from .codec import decode, encode
from .resize import resize
from .transform import compress, decompress, standard_tables
from .types import CoefficientImage, Component, PixelImage, QuantTable

__all__ = [
    "CoefficientImage", "Component", "PixelImage", "QuantTable",
    "compress", "decode", "decompress", "encode", "resize", "standard_tables",
]
