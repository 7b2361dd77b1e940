"""Run a CLIP-style checkpoint and write EMB1 embeddings + manifests.

The exporter is format-only: no aggregation, no mining, no math beyond
L2 normalization.  Outputs interoperate with any EMB1 consumer.

Manifest files are UTF-8 text.  Lines starting with "#" are comments;
the i-th non-comment line describes EMB1 row i (the image path for
image exports, the query string for text exports).  Unreadable images
are skipped and recorded as a "# skipped: <path>: <reason>" comment at
the position they would have occupied.  The header comments record the
model identifier and, for images, the checkpoint's own preprocessing
(this tool never imposes its own resize/crop policy).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .emb1 import write_embeddings

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp")

# Default prompt ensemble; must stay aligned with the consumer's
# "simple" prompt set so label-major row order means the same thing on
# both sides of the file boundary.
SIMPLE_PROMPTS = (
    "itap of a {label}",
    "a bad photo of the {label}",
    "an origami {label}",
    "a photo of the large {label}",
    "a {label} in a video game",
    "art of the {label}",
    "a photo of the small {label}",
)


class TokenOverflowError(ValueError):
    """A text query exceeds the model's context length."""


@dataclass(frozen=True)
class ExportJob:
    """Everything one export run needs; field names mirror the CLI flags."""

    model_id: str
    out_embeddings: Path
    out_manifest: Path
    images: tuple[Path, ...] = ()
    image_dir: Path | None = None
    corpus_file: Path | None = None
    prompt_set: str = "simple"
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def image_paths(self) -> list[Path]:
        """Explicit list as given; directory scans in sorted name order."""
        paths = [Path(p) for p in self.images]
        if self.image_dir is not None:
            paths.extend(
                sorted(
                    p
                    for p in Path(self.image_dir).iterdir()
                    if p.suffix.lower() in _IMAGE_SUFFIXES
                )
            )
        if not paths:
            raise ValueError("no input images (give --images or --image-dir)")
        return paths


def _load_model(job: ExportJob):
    # imported lazily so `--help` stays fast and torch-free
    import torch
    from transformers import CLIPModel, CLIPProcessor

    model = CLIPModel.from_pretrained(job.model_id)
    processor = CLIPProcessor.from_pretrained(job.model_id)
    model.eval()
    model.to(torch.device(job.device))
    return model, processor


def _features(output):
    # newer transformers return an output object, older ones the tensor
    return output.pooler_output if hasattr(output, "pooler_output") else output


def _size_str(size) -> str:
    # transformers stores sizes as dicts or SizeDict objects depending on version
    if size is None:
        return "?"
    if not isinstance(size, dict):
        size = {k: v for k, v in vars(size).items() if v is not None}
    return ",".join(f"{k}={v}" for k, v in sorted(size.items()) if v is not None)


def _preprocessing_summary(image_processor) -> str:
    parts = []
    if getattr(image_processor, "do_resize", False):
        parts.append(f"resize {_size_str(getattr(image_processor, 'size', None))}")
    if getattr(image_processor, "do_center_crop", False):
        parts.append(f"center crop {_size_str(getattr(image_processor, 'crop_size', None))}")
    if getattr(image_processor, "do_rescale", False):
        parts.append(f"rescale {getattr(image_processor, 'rescale_factor', None)}")
    if getattr(image_processor, "do_normalize", False):
        parts.append(
            f"normalize mean={getattr(image_processor, 'image_mean', None)} "
            f"std={getattr(image_processor, 'image_std', None)}"
        )
    return "; ".join(parts) if parts else "checkpoint default"


def _write_manifest(path: Path, header: list[str], lines: list[str]) -> None:
    body = [f"# {h}" for h in header] + lines
    Path(path).write_text("\n".join(body) + "\n", encoding="utf-8")


def export_images(job: ExportJob) -> int:
    """Embed images in input order; returns the number of rows written."""
    import torch

    model, processor = _load_model(job)
    paths = job.image_paths()

    manifest_lines: list[str] = []
    loaded: list[Image.Image] = []
    for path in paths:
        try:
            with Image.open(path) as img:
                loaded.append(img.convert("RGB"))
            manifest_lines.append(str(path))
        except (OSError, UnidentifiedImageError, ValueError) as exc:
            manifest_lines.append(f"# skipped: {path}: {exc}")
    if not loaded:
        raise ValueError("every input image failed to decode")

    chunks = []
    with torch.no_grad():
        for start in range(0, len(loaded), job.batch_size):
            batch = loaded[start : start + job.batch_size]
            pixel_values = processor(images=batch, return_tensors="pt").pixel_values
            out = model.get_image_features(pixel_values=pixel_values.to(model.device))
            chunks.append(_features(out).cpu().numpy().astype(np.float64))
    features = np.vstack(chunks)
    if features.shape[1] != model.config.projection_dim:
        raise RuntimeError(
            f"model produced width {features.shape[1]}, "
            f"config promises {model.config.projection_dim}"
        )

    write_embeddings(features, job.out_embeddings)
    _write_manifest(
        job.out_manifest,
        [
            "oodmine-exporter image export",
            f"model: {job.model_id}",
            f"preprocessing: {_preprocessing_summary(processor.image_processor)}",
        ],
        manifest_lines,
    )
    return features.shape[0]


def read_corpus(path: str | Path) -> list[str]:
    labels = [line.strip() for line in Path(path).read_text(encoding="utf-8").split("\n")]
    labels = [label for label in labels if label]
    if not labels:
        raise ValueError(f"{path}: no labels")
    return labels


def load_prompts(name_or_path: str) -> tuple[str, ...]:
    if name_or_path == "simple":
        return SIMPLE_PROMPTS
    import json

    templates = json.loads(Path(name_or_path).read_text(encoding="utf-8"))
    if not isinstance(templates, list) or not all(isinstance(t, str) for t in templates):
        raise ValueError(f"{name_or_path}: prompt file must be a JSON array of strings")
    for i, tpl in enumerate(templates):
        if tpl.count("{label}") != 1:
            raise ValueError(f"template {i} ({tpl!r}) needs exactly one {{label}} slot")
    return tuple(templates)


def export_text(job: ExportJob) -> int:
    """Embed label-major prompt expansions; returns rows written.

    Row order is labels-outer, templates-inner, so |corpus| x |prompts|
    rows land in exactly the order the consumer's aggregation expects.
    """
    import torch

    if job.corpus_file is None:
        raise ValueError("text export needs a corpus file")
    model, processor = _load_model(job)
    tokenizer = processor.tokenizer
    labels = read_corpus(job.corpus_file)
    prompts = load_prompts(job.prompt_set)

    queries = [
        (label, tpl.replace("{label}", label)) for label in labels for tpl in prompts
    ]
    limit = int(model.config.text_config.max_position_embeddings)
    for label, query in queries:
        n_tokens = len(tokenizer(query).input_ids)
        if n_tokens > limit:
            raise TokenOverflowError(
                f"label {label!r} expands to a {n_tokens}-token query, "
                f"model limit is {limit}"
            )

    chunks = []
    texts = [q for _, q in queries]
    with torch.no_grad():
        for start in range(0, len(texts), job.batch_size):
            batch = tokenizer(
                texts[start : start + job.batch_size],
                padding=True,
                return_tensors="pt",
            )
            out = model.get_text_features(
                input_ids=batch.input_ids.to(model.device),
                attention_mask=batch.attention_mask.to(model.device),
            )
            chunks.append(_features(out).cpu().numpy().astype(np.float64))
    features = np.vstack(chunks)

    write_embeddings(features, job.out_embeddings)
    _write_manifest(
        job.out_manifest,
        [
            "oodmine-exporter text export",
            f"model: {job.model_id}",
            f"labels: {len(labels)}  prompts: {len(prompts)}  order: label-major",
        ],
        texts,
    )
    return features.shape[0]
