"""CLIP-to-EMB1 export bridge."""

from .emb1 import write_embeddings
from .export import (
    SIMPLE_PROMPTS,
    ExportJob,
    TokenOverflowError,
    export_images,
    export_text,
    load_prompts,
    read_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "ExportJob",
    "SIMPLE_PROMPTS",
    "TokenOverflowError",
    "export_images",
    "export_text",
    "load_prompts",
    "read_corpus",
    "write_embeddings",
]
