"""Planted-concept synthetic instances with known ground truth.

The generator builds a corpus of well-separated unit directions (planted
concepts plus distractor labels), draws images as noisy copies of their
concept direction, and rejects any image whose top-1 margin over every
other label falls below the requested margin.  That invariant is what lets
end-to-end tests treat the planted labels as an exact oracle.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .embedding_io import EmbeddingMatrix, normalize_rows

_MAX_DRAWS = 100_000

OOD_MODES = ("fresh", "near_distractors")


class GenerationInfeasibleError(RuntimeError):
    """Rejection sampling exhausted its draw budget; parameters infeasible."""


@dataclass(frozen=True)
class PlantedParams:
    n_concepts: int = 20
    samples_per_concept: int = 200
    n_distractors: int = 480
    dims: int = 64
    margin: float = 0.2
    noise: float = 0.05
    seed: int = 0
    n_ood: int = 1000
    ood_mode: str = "fresh"
    # Cap on pairwise cosine between generated directions; 0.5 is loose
    # enough to accept most draws at dims >= 64 yet keeps labels distinct.
    direction_max_cos: float = 0.5
    n_ood_directions: int = 8

    def __post_init__(self) -> None:
        if self.n_concepts < 2:
            raise ValueError("need at least 2 concepts")
        if self.samples_per_concept < 1 or self.dims < 2:
            raise ValueError("samples_per_concept >= 1 and dims >= 2 required")
        if self.n_distractors < 0 or self.n_ood < 0:
            raise ValueError("counts must be non-negative")
        if not self.margin > 0:
            raise ValueError("margin must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.ood_mode not in OOD_MODES:
            raise ValueError(f"ood_mode must be one of {OOD_MODES}")
        if self.ood_mode == "near_distractors" and self.n_ood and not self.n_distractors:
            raise ValueError("near_distractors mode needs distractor labels")


@dataclass(frozen=True)
class PlantedInstance:
    images: EmbeddingMatrix
    true_concept: np.ndarray
    text: EmbeddingMatrix
    labels: tuple[str, ...]
    ood: EmbeddingMatrix | None
    params: PlantedParams

    @property
    def planted_labels(self) -> tuple[str, ...]:
        return self.labels[: self.params.n_concepts]


def _draw_directions(
    rng: np.random.Generator, count: int, existing: np.ndarray, params: PlantedParams
) -> np.ndarray:
    """Unit directions whose pairwise |cos| to all kept directions stays capped."""
    dims, cap = params.dims, params.direction_max_cos
    kept = list(existing)
    out = []
    draws = 0
    while len(out) < count:
        if draws >= _MAX_DRAWS:
            raise GenerationInfeasibleError(
                f"could not place {count} directions at max cosine {cap} in {dims} dims"
            )
        draws += 1
        v = rng.standard_normal(dims)
        v /= np.linalg.norm(v)
        if kept and np.abs(np.asarray(kept) @ v).max() > cap:
            continue
        kept.append(v)
        out.append(v)
    return np.asarray(out)


def _noisy_copies(
    rng: np.random.Generator, direction: np.ndarray, count: int, noise: float
) -> np.ndarray:
    pert = direction[None, :] + noise * rng.standard_normal((count, direction.size))
    return normalize_rows(pert)


def generate_planted_instance(params: PlantedParams) -> PlantedInstance:
    """Build one deterministic instance; see module docstring for guarantees."""
    rng = np.random.default_rng(params.seed)
    concepts = _draw_directions(rng, params.n_concepts, np.empty((0, params.dims)), params)
    distractors = _draw_directions(rng, params.n_distractors, concepts, params)
    text_rows = np.vstack([concepts, distractors]) if params.n_distractors else concepts
    text_matrix = EmbeddingMatrix.from_array(text_rows)
    # Margin acceptance must run against the float32 rows that get stored,
    # otherwise rounding could leak sub-margin images into the instance.
    text64 = text_matrix.data.astype(np.float64)

    images = np.empty((params.n_concepts * params.samples_per_concept, params.dims))
    true_concept = np.repeat(np.arange(params.n_concepts), params.samples_per_concept)
    for k in range(params.n_concepts):
        accepted = []
        draws = 0
        while len(accepted) < params.samples_per_concept:
            if draws >= _MAX_DRAWS:
                raise GenerationInfeasibleError(
                    f"margin {params.margin} unreachable at noise {params.noise} "
                    f"for concept {k}"
                )
            batch = min(params.samples_per_concept - len(accepted) + 8, 512)
            draws += batch
            cand = _noisy_copies(rng, concepts[k], batch, params.noise).astype(np.float64)
            sims = cand @ text64.T
            own = sims[:, k].copy()
            sims[:, k] = -np.inf
            ok = own - sims.max(axis=1) >= params.margin
            accepted.extend(cand[ok])
        start = k * params.samples_per_concept
        images[start : start + params.samples_per_concept] = accepted[
            : params.samples_per_concept
        ]

    ood = None
    if params.n_ood:
        if params.ood_mode == "fresh":
            centers = _draw_directions(
                rng, min(params.n_ood_directions, params.n_ood), text_rows, params
            )
        else:
            centers = distractors
        picks = rng.integers(len(centers), size=params.n_ood)
        rows = np.vstack(
            [_noisy_copies(rng, centers[c], 1, params.noise) for c in picks]
        )
        ood = EmbeddingMatrix.from_array(rows)

    labels = tuple(
        [f"concept_{k:03d}" for k in range(params.n_concepts)]
        + [f"distractor_{j:04d}" for j in range(params.n_distractors)]
    )
    return PlantedInstance(
        images=EmbeddingMatrix.from_array(images),
        true_concept=true_concept,
        text=text_matrix,
        labels=labels,
        ood=ood,
        params=params,
    )


def observed_margin(instance: PlantedInstance) -> float:
    """Smallest (own-concept cosine - best other cosine) over all images."""
    sims = instance.images.data.astype(np.float64) @ instance.text.data.T.astype(np.float64)
    own = sims[np.arange(sims.shape[0]), instance.true_concept].copy()
    sims[np.arange(sims.shape[0]), instance.true_concept] = -np.inf
    return float((own - sims.max(axis=1)).min())


def write_instance(instance: PlantedInstance, out_dir: str | Path) -> dict[str, Path]:
    """Write EMB1 matrices, corpus labels, and the ground-truth JSON."""
    from .embedding_io import save_embeddings, save_labels

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "images": out / "id.emb",
        "text": out / "text.emb",
        "corpus": out / "corpus.txt",
        "truth": out / "truth.json",
    }
    save_embeddings(instance.images, paths["images"])
    save_embeddings(instance.text, paths["text"])
    save_labels(instance.labels, paths["corpus"])
    if instance.ood is not None:
        paths["ood"] = out / "ood.emb"
        save_embeddings(instance.ood, paths["ood"])
    truth = {
        "params": asdict(instance.params),
        "true_concept": instance.true_concept.tolist(),
        "planted_labels": list(instance.planted_labels),
    }
    paths["truth"].write_text(
        json.dumps(truth, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return paths
