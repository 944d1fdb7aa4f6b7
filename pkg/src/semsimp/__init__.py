"""Semantic-aware point cloud simplification and surface reconstruction."""

from .model import (Camera, CameraSet, DepthMap, LabelInfo, LabeledCloud, LabelRaster, Palette,
                    TriMesh, ValidationError)
from .simplify import METHODS, SimplifyConfig, SimplifyError
from .spatial import RegionSpec

__version__ = "0.1.0"

__all__ = [
    "Camera", "CameraSet", "DepthMap", "LabelInfo", "LabeledCloud", "LabelRaster", "Palette",
    "TriMesh", "ValidationError", "METHODS", "SimplifyConfig", "SimplifyError", "RegionSpec",
]
