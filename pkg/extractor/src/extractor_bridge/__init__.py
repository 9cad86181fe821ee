"""Offline audio-to-embedding extraction writing FSE1 frame files."""

__version__ = "0.1.0"

from .extract import ExtractionJob, ExtractionReport, extract
from .fse import verify_fse, write_fse
from .models import ModelAdapter, available_models, load_adapter, register_adapter

__all__ = [
    "__version__",
    "ExtractionJob",
    "ExtractionReport",
    "extract",
    "verify_fse",
    "write_fse",
    "ModelAdapter",
    "available_models",
    "load_adapter",
    "register_adapter",
]
