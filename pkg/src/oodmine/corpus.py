"""Label corpora, prompt templates, and prompt-ensemble aggregation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .embedding_io import EmbeddingMatrix


class DedupPolicy(str, Enum):
    """How raw corpus lines are collapsed.

    Only NO_DUPLICATES_ONE_LEMMA deduplicates; lemma selection itself is a
    property of the corpus file, done by whoever produced it.
    """

    NO_DUPLICATES_ONE_LEMMA = "no_duplicates_one_lemma"
    DUPLICATES_ALL_LEMMAS = "duplicates_all_lemmas"
    DUPLICATES_ONE_LEMMA = "duplicates_one_lemma"


class EmptyCorpusError(ValueError):
    """No labels survived ingestion filtering."""


@dataclass(frozen=True)
class Corpus:
    """Ordered label-name corpus with its ingestion provenance."""

    labels: tuple[str, ...]
    source_tag: str = ""
    dedup_policy: DedupPolicy = DedupPolicy.NO_DUPLICATES_ONE_LEMMA

    def __post_init__(self) -> None:
        if not self.labels:
            raise EmptyCorpusError("corpus has no labels")
        if self.dedup_policy is DedupPolicy.NO_DUPLICATES_ONE_LEMMA:
            keys = [s.strip().casefold() for s in self.labels]
            if len(set(keys)) != len(keys):
                raise ValueError("corpus labels must be case-fold distinct under this policy")

    def __len__(self) -> int:
        return len(self.labels)


def ingest_corpus(
    raw_lines: Iterable[str],
    policy: DedupPolicy = DedupPolicy.NO_DUPLICATES_ONE_LEMMA,
    source_tag: str = "",
) -> Corpus:
    """Build a corpus from raw text lines.

    Blank/whitespace-only lines are dropped.  Under the deduplicating policy
    the key is case-fold plus whitespace trim and the first occurrence wins,
    so ingestion is idempotent.
    """
    labels: list[str] = []
    seen: set[str] = set()
    dedup = policy is DedupPolicy.NO_DUPLICATES_ONE_LEMMA
    for line in raw_lines:
        label = line.strip()
        if not label:
            continue
        if dedup:
            key = label.casefold()
            if key in seen:
                continue
            seen.add(key)
        labels.append(label)
    if not labels:
        raise EmptyCorpusError("no labels left after filtering")
    return Corpus(tuple(labels), source_tag=source_tag, dedup_policy=policy)


def load_corpus(path: str | Path, policy: DedupPolicy, source_tag: str = "") -> Corpus:
    text = Path(path).read_text(encoding="utf-8")
    return ingest_corpus(text.split("\n"), policy, source_tag or Path(path).stem)


_PLACEHOLDER = "{label}"

# Seven-template ensemble used for all text queries unless overridden.
SIMPLE_PROMPTS = (
    "itap of a {label}",
    "a bad photo of the {label}",
    "an origami {label}",
    "a photo of the large {label}",
    "a {label} in a video game",
    "art of the {label}",
    "a photo of the small {label}",
)


@dataclass(frozen=True)
class PromptSet:
    """Ordered prompt templates, each with exactly one ``{label}`` slot."""

    templates: tuple[str, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if not self.templates:
            raise ValueError("prompt set needs at least one template")
        for i, tpl in enumerate(self.templates):
            if tpl.count(_PLACEHOLDER) != 1:
                raise ValueError(
                    f"template {i} ({tpl!r}) must contain exactly one {_PLACEHOLDER}"
                )

    def __len__(self) -> int:
        return len(self.templates)


def load_prompt_set(name_or_path: str | Path) -> PromptSet:
    """Resolve a prompt set: the built-in name "simple" or a JSON file.

    A prompt file is a JSON array of template strings.
    """
    if str(name_or_path) == "simple":
        return PromptSet(SIMPLE_PROMPTS, name="simple")
    path = Path(name_or_path)
    templates = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(templates, list) or not all(isinstance(t, str) for t in templates):
        raise ValueError(f"{path}: prompt file must be a JSON array of strings")
    return PromptSet(tuple(templates), name=path.stem)


def expand_prompts(corpus: Corpus, prompts: PromptSet) -> list[str]:
    """Produce label-major query strings: all templates of label 0 first."""
    return [
        tpl.replace(_PLACEHOLDER, label)
        for label in corpus.labels
        for tpl in prompts.templates
    ]


def aggregate_prompt_embeddings(
    per_query: EmbeddingMatrix, n_labels: int, n_prompts: int
) -> EmbeddingMatrix:
    """Collapse label-major per-query embeddings to one unit row per label.

    Row l of the result is the renormalized arithmetic mean of the
    n_prompts query embeddings for label l.
    """
    if n_labels < 1 or n_prompts < 1:
        raise ValueError("n_labels and n_prompts must be positive")
    if per_query.rows != n_labels * n_prompts:
        raise ValueError(
            f"expected {n_labels}x{n_prompts}={n_labels * n_prompts} query rows, "
            f"got {per_query.rows}"
        )
    grouped = per_query.data.astype(np.float64).reshape(n_labels, n_prompts, per_query.dims)
    means = grouped.mean(axis=1)
    norms = np.linalg.norm(means, axis=1)
    if np.any(norms < 1e-8):
        bad = int(np.argmax(norms < 1e-8))
        raise ValueError(f"prompt mean for label {bad} is degenerate (norm {norms[bad]:.3g})")
    return EmbeddingMatrix.from_array(means / norms[:, None])
