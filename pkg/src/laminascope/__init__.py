"""Lamina detection and epidural depth measurement in paramedian spine ultrasound."""

from .imagecore import load_image, save_image
from .phantom import PhantomSpec, canonical, render
from .pipeline import DetectionResult, PipelineConfig, detect, detect_sequence

__all__ = [
    "DetectionResult",
    "PhantomSpec",
    "PipelineConfig",
    "canonical",
    "detect",
    "detect_sequence",
    "load_image",
    "render",
    "save_image",
]

__version__ = "0.1.0"
