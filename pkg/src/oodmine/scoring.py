"""OOD score functions over unit-norm embeddings.

All scores follow the same orientation: larger means more in-distribution.
Softmax-family scores accumulate in float64 with a max-logit shift so that
huge negative-label sets at small temperatures stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .embedding_io import EmbeddingMatrix, cosine_sim


@dataclass(frozen=True)
class ScoreConfig:
    """Scoring knobs.

    tau is the softmax temperature; there is no universal right value, the
    default is one tenth of the common 0.01 pretraining temperature.
    group_size/seed only matter for the grouped score.
    """

    tau: float = 0.001
    group_size: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.group_size is not None and self.group_size < 1:
            raise ValueError("group_size must be >= 1")


def _logits(images: EmbeddingMatrix, text: EmbeddingMatrix, tau: float) -> np.ndarray:
    return cosine_sim(images, text) / tau


def score_posneg(
    images: EmbeddingMatrix,
    pos_text: EmbeddingMatrix,
    neg_text: EmbeddingMatrix | None,
    cfg: ScoreConfig = ScoreConfig(),
) -> np.ndarray:
    """Positive/negative softmax score.

    S(x) = sum_pos exp(h.z/tau) / (sum_pos exp(h.z/tau) + sum_neg exp(h.z/tau))

    With no negatives the denominator equals the numerator, so the score is
    exactly 1.0 for every image.
    """
    if neg_text is None:
        return np.ones(images.rows, dtype=np.float64)
    pos = _logits(images, pos_text, cfg.tau)
    neg = _logits(images, neg_text, cfg.tau)
    # One shift per image across both blocks keeps the ratio exact.
    shift = np.maximum(pos.max(axis=1), neg.max(axis=1))[:, None]
    pos_sum = np.exp(pos - shift).sum(axis=1)
    neg_sum = np.exp(neg - shift).sum(axis=1)
    return pos_sum / (pos_sum + neg_sum)


def score_grouped(
    images: EmbeddingMatrix,
    pos_text: EmbeddingMatrix,
    neg_groups: Sequence[EmbeddingMatrix],
    cfg: ScoreConfig = ScoreConfig(),
) -> np.ndarray:
    """Mean of the posneg score over disjoint negative groups."""
    if not neg_groups:
        raise ValueError("need at least one negative group")
    per_group = [score_posneg(images, pos_text, group, cfg) for group in neg_groups]
    return np.mean(per_group, axis=0)


def score_mcm(
    images: EmbeddingMatrix,
    pos_text: EmbeddingMatrix,
    cfg: ScoreConfig = ScoreConfig(),
) -> np.ndarray:
    """Maximum softmax probability over positive-label similarities."""
    logits = _logits(images, pos_text, cfg.tau)
    shift = logits.max(axis=1, keepdims=True)
    probs = np.exp(logits - shift)
    return (probs.max(axis=1) / probs.sum(axis=1)).astype(np.float64)


def score_maxlogit(images: EmbeddingMatrix, pos_text: EmbeddingMatrix) -> np.ndarray:
    """Largest image-text cosine over positive labels."""
    return cosine_sim(images, pos_text).max(axis=1)


def score_energy(
    images: EmbeddingMatrix,
    pos_text: EmbeddingMatrix,
    cfg: ScoreConfig = ScoreConfig(),
) -> np.ndarray:
    """Temperature-scaled log-sum-exp of positive-label similarities."""
    logits = _logits(images, pos_text, cfg.tau)
    return cfg.tau * logsumexp(logits, axis=1)
