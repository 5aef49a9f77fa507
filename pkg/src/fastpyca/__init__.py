"""Bounded-rectification FAST detection with pyramidal culling and aggregation."""

from .fast import CornerLut, CrfMatrix, DetectorParams, SegmentMasks, build_lut, detect_crf
from .image import GrayImage, Pyramid, build_pyramid, load_pgm, read_pgm, write_pgm
from .pyca import CellConfig, Keypoint, NmsConfig, pyca_pipeline, run_pipeline

__all__ = [
    "CellConfig", "CornerLut", "CrfMatrix", "DetectorParams", "GrayImage", "Keypoint",
    "NmsConfig", "Pyramid", "SegmentMasks", "build_lut", "build_pyramid", "detect_crf",
    "load_pgm", "pyca_pipeline", "read_pgm", "run_pipeline", "write_pgm",
]

__version__ = "0.1.0"
