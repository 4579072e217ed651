"""Bridge from image folder trees to FSTS feature files."""

from .encoders import ClipEncoder, EncoderError, HashEncoder, make_encoder
from .export import ExportError, ExportResult, export_folder, load_templates, resolve_prompts

__version__ = "0.1.0"

__all__ = [
    "ClipEncoder",
    "EncoderError",
    "ExportError",
    "ExportResult",
    "HashEncoder",
    "export_folder",
    "load_templates",
    "make_encoder",
    "resolve_prompts",
]
