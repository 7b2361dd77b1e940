"""Mining positive/negative label sets from a corpus.

Three routes produce the positive set: assignment-count thresholding,
cluster majority voting, and trusting a given ground-truth list.  Negatives
are the corpus complement, optionally pruned down to the K labels most
dissimilar from the positives.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .clustering import ClusterAssignment
from .corpus import Corpus
from .embedding_io import EmbeddingMatrix, cosine_sim

MINING_METHODS = ("posmine", "clustermine", "given_gt")


class EmptyPositiveSetError(ValueError):
    """Mining produced no positive labels; downstream scores are undefined."""


@dataclass(frozen=True)
class ZeroShotAssignment:
    """Per-image top-1 corpus label index and its cosine similarity."""

    top1: np.ndarray
    similarity: np.ndarray
    n_labels: int

    def __post_init__(self) -> None:
        top1 = np.ascontiguousarray(self.top1, dtype=np.int64)
        sim = np.ascontiguousarray(self.similarity, dtype=np.float64)
        top1.setflags(write=False)
        sim.setflags(write=False)
        object.__setattr__(self, "top1", top1)
        object.__setattr__(self, "similarity", sim)
        if top1.ndim != 1 or sim.shape != top1.shape:
            raise ValueError("top1 and similarity must be matching 1-D arrays")
        if top1.size and (top1.min() < 0 or top1.max() >= self.n_labels):
            raise ValueError("label indices out of corpus range")

    @property
    def n_images(self) -> int:
        return int(self.top1.size)


@dataclass(frozen=True)
class MinedLabelSets:
    """Disjoint positive/negative index sets into a corpus."""

    pos: tuple[int, ...]
    neg: tuple[int, ...]
    method: str
    params: dict = field(default_factory=dict)
    # Diagnostics only, not part of the wire format: the winning corpus
    # label of each nonempty cluster, in cluster order.
    cluster_labels: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.method not in MINING_METHODS:
            raise ValueError(f"unknown mining method {self.method!r}")
        pos = tuple(int(i) for i in self.pos)
        neg = tuple(int(i) for i in self.neg)
        if list(pos) != sorted(set(pos)) or list(neg) != sorted(set(neg)):
            raise ValueError("pos and neg must be sorted duplicate-free index tuples")
        if set(pos) & set(neg):
            raise ValueError("pos and neg must be disjoint")
        if (pos and pos[0] < 0) or (neg and neg[0] < 0):
            raise ValueError("indices must be non-negative")
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "neg", neg)

    def to_json(self) -> str:
        payload = {
            "method": self.method,
            "params": self.params,
            "pos": list(self.pos),
            "neg": list(self.neg),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MinedLabelSets":
        payload = json.loads(text)
        return cls(
            pos=tuple(payload["pos"]),
            neg=tuple(payload["neg"]),
            method=payload["method"],
            params=dict(payload.get("params", {})),
        )


def save_mined(sets: MinedLabelSets, path: str | Path, corpus: Corpus | None = None) -> None:
    """Write the JSON wire form plus, given the corpus, a readable pos dump."""
    path = Path(path)
    path.write_text(sets.to_json(), encoding="utf-8")
    if corpus is not None:
        for i in (*sets.pos, *sets.neg):
            if i >= len(corpus):
                raise ValueError(f"index {i} outside corpus of {len(corpus)}")
        dump = path.with_suffix(".labels.txt")
        dump.write_text(
            "".join(corpus.labels[i] + "\n" for i in sets.pos), encoding="utf-8"
        )


def load_mined(path: str | Path) -> MinedLabelSets:
    return MinedLabelSets.from_json(Path(path).read_text(encoding="utf-8"))


def zero_shot_assign(images: EmbeddingMatrix, text: EmbeddingMatrix) -> ZeroShotAssignment:
    """Top-1 cosine label per image; ties go to the lowest corpus index."""
    sims = cosine_sim(images, text)
    top1 = sims.argmax(axis=1)
    return ZeroShotAssignment(
        top1=top1,
        similarity=sims[np.arange(sims.shape[0]), top1],
        n_labels=text.rows,
    )


def complement_negatives(pos: Iterable[int], corpus: Corpus) -> tuple[int, ...]:
    """All corpus indices not in pos, sorted."""
    pos_set = set(int(i) for i in pos)
    for i in pos_set:
        if not 0 <= i < len(corpus):
            raise ValueError(f"pos index {i} outside corpus of {len(corpus)}")
    return tuple(i for i in range(len(corpus)) if i not in pos_set)


def posmine(assign: ZeroShotAssignment, corpus: Corpus, M: int) -> MinedLabelSets:
    """Positives = labels that are top-1 for at least M images."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if assign.n_labels != len(corpus):
        raise ValueError("assignment was made against a different corpus size")
    counts = np.bincount(assign.top1, minlength=len(corpus))
    pos = tuple(int(i) for i in np.flatnonzero(counts >= M))
    if not pos:
        raise EmptyPositiveSetError(
            f"no label reaches {M} assignments (max count {int(counts.max())})"
        )
    return MinedLabelSets(
        pos=pos,
        neg=complement_negatives(pos, corpus),
        method="posmine",
        params={"M": M},
    )


def clustermine(
    assign: ZeroShotAssignment, clusters: ClusterAssignment, corpus: Corpus
) -> MinedLabelSets:
    """Positives = modal top-1 label of each cluster, deduplicated.

    Different clusters voting for the same label collapse to one positive,
    which is what bounds the set by the cluster count.  Ties inside a
    cluster go to the lower corpus index; empty clusters cast no vote.
    """
    if assign.n_labels != len(corpus):
        raise ValueError("assignment was made against a different corpus size")
    if clusters.n_samples != assign.n_images:
        raise ValueError("cluster and zero-shot assignments cover different samples")
    # Sparse (cluster, label) vote counts; a dense C x |corpus| table would
    # not survive a 4000-cluster run against a 70k-label corpus.
    pair = clusters.assignment * len(corpus) + assign.top1
    uniq, counts = np.unique(pair, return_counts=True)
    winner: dict[int, tuple[int, int]] = {}
    for p, n in zip(uniq.tolist(), counts.tolist()):
        c, label = divmod(p, len(corpus))
        # uniq is ascending, so on tied counts the lower label arrives first
        # and strict > keeps it.
        if c not in winner or n > winner[c][0]:
            winner[c] = (n, label)
    cluster_labels = [winner[c][1] for c in sorted(winner)]
    pos = tuple(sorted(set(cluster_labels)))
    return MinedLabelSets(
        pos=pos,
        neg=complement_negatives(pos, corpus),
        method="clustermine",
        params={"C": clusters.C},
        cluster_labels=tuple(cluster_labels),
    )


def from_ground_truth(corpus: Corpus, gt_labels: Sequence[str]) -> MinedLabelSets:
    """Positives = corpus entries matching the given label strings (case-fold)."""
    wanted = {s.strip().casefold() for s in gt_labels if s.strip()}
    if not wanted:
        raise EmptyPositiveSetError("ground-truth label list is empty")
    pos = tuple(
        i for i, label in enumerate(corpus.labels) if label.strip().casefold() in wanted
    )
    if not pos:
        raise EmptyPositiveSetError("no ground-truth label occurs in the corpus")
    return MinedLabelSets(
        pos=pos,
        neg=complement_negatives(pos, corpus),
        method="given_gt",
        params={},
    )


def nearest_rank_index(n: int, percentile: float) -> int:
    """0-based index of the nearest-rank p-quantile in n ascending values.

    Fraction(str(p)) keeps decimal inputs exact, so e.g. ceil(0.95*20) is
    19 and not the float artifact 20.
    """
    if not 0 < percentile <= 1:
        raise ValueError("percentile must be in (0, 1]")
    rank = math.ceil(Fraction(str(percentile)) * n)
    return min(max(rank, 1), n) - 1


def negative_mine(
    pos_text: EmbeddingMatrix,
    neg_candidates_text: EmbeddingMatrix,
    K: int,
    percentile: float = 0.95,
) -> np.ndarray:
    """Indices of the K candidates most distant from the positive set.

    Per candidate the distance score is the nearest-rank `percentile`
    quantile of its cosine distances to all positives; taking a high
    quantile instead of the maximum stops a single far-away positive from
    promoting an otherwise-close candidate.  Ties keep the lower index.
    K >= the candidate count keeps everything.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    n_cand = neg_candidates_text.rows
    if K >= n_cand:
        return np.arange(n_cand, dtype=np.int64)
    dist = np.sort(1.0 - cosine_sim(neg_candidates_text, pos_text), axis=1)
    scores = dist[:, nearest_rank_index(pos_text.rows, percentile)]
    order = np.lexsort((np.arange(n_cand), -scores))
    return np.sort(order[:K]).astype(np.int64)


def group_negatives(
    neg: Sequence[int], group_size: int, seed: int = 0
) -> list[np.ndarray]:
    """Random disjoint groups of the given size; the last may be smaller."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    neg = np.asarray(list(neg), dtype=np.int64)
    perm = neg[np.random.default_rng(seed).permutation(neg.size)]
    return [perm[i : i + group_size] for i in range(0, neg.size, group_size)]
