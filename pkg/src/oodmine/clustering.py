"""Spherical k-means over unit vectors plus cluster-quality diagnostics.

Clustering here only needs to be good enough to drive majority voting, so
the solver is a plain alternating k-means on cosine similarity with a
k-means++ style init.  Externally computed assignments (e.g. from a deep
clustering run) can be imported as a drop-in through import_assignments.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .embedding_io import EmbeddingMatrix

_UNIT_TOL = 1e-6


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-sample cluster index in [0, C) with optional unit centroids."""

    assignment: np.ndarray
    C: int
    centroids: np.ndarray | None = None
    seed: int | None = None
    iterations_run: int = 0
    # Mean sample-to-centroid cosine recorded at each assignment step.
    objective_trace: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        assignment = np.ascontiguousarray(self.assignment, dtype=np.int64)
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)
        if self.C < 1:
            raise ValueError("C must be >= 1")
        if assignment.ndim != 1 or assignment.size < 1:
            raise ValueError("assignment must be a nonempty 1-D index array")
        if assignment.min() < 0 or assignment.max() >= self.C:
            raise ValueError("cluster indices must lie in [0, C)")
        if self.centroids is not None:
            cents = np.asarray(self.centroids)
            if cents.shape[0] != self.C:
                raise ValueError("need one centroid per cluster")
            norms = np.linalg.norm(cents.astype(np.float64), axis=1)
            if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
                raise ValueError("centroids must be unit-norm")

    @property
    def n_samples(self) -> int:
        return int(self.assignment.size)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.C)


def _plusplus_init(data: np.ndarray, C: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding with cosine distance: weight = (1 - best cos)^2."""
    n = data.shape[0]
    chosen = np.empty(C, dtype=np.int64)
    chosen[0] = rng.integers(n)
    best_cos = data @ data[chosen[0]]
    for k in range(1, C):
        weights = np.square(np.clip(1.0 - best_cos, 0.0, None))
        weights[chosen[:k]] = 0.0
        total = weights.sum()
        if total <= 1e-30:
            # Degenerate geometry (duplicated points): fall back to any
            # not-yet-chosen index so C distinct seeds always exist.
            pool = np.setdiff1d(np.arange(n), chosen[:k])
            chosen[k] = rng.choice(pool)
        else:
            chosen[k] = rng.choice(n, p=weights / total)
        best_cos = np.maximum(best_cos, data @ data[chosen[k]])
    return data[chosen].copy()


def spherical_kmeans(
    features: EmbeddingMatrix,
    C: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-4,
) -> ClusterAssignment:
    """Cluster unit vectors by cosine similarity.

    Alternates argmax-cosine assignment with normalized-mean centroid
    updates; both steps can only raise the mean sample-to-centroid cosine,
    so the objective is monotone.  Stops when every centroid moves by at
    most tol in cosine distance.  Empty clusters are reseeded with the
    sample currently farthest from its own centroid.
    """
    n = features.rows
    if C < 1:
        raise ValueError("C must be >= 1")
    if C > n:
        raise ValueError(f"C={C} exceeds sample count {n}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")

    data = features.data.astype(np.float64)
    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(data, C, rng)

    assignment = np.zeros(n, dtype=np.int64)
    iterations = 0
    trace = []
    for _ in range(max_iter):
        sims = data @ centroids.T
        assignment = sims.argmax(axis=1)
        own_sim = sims[np.arange(n), assignment]
        trace.append(float(own_sim.mean()))

        new_centroids = centroids.copy()
        empty = []
        for c in range(C):
            members = assignment == c
            if not members.any():
                empty.append(c)
                continue
            mean = data[members].sum(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 1e-12:
                new_centroids[c] = mean / norm
        if empty:
            # Reseed each empty cluster with a distinct worst-served sample.
            worst = np.argsort(own_sim)[: len(empty)]
            for c, i in zip(empty, worst):
                new_centroids[c] = data[i]
        iterations += 1
        movement = 1.0 - np.einsum("ij,ij->i", centroids, new_centroids)
        centroids = new_centroids
        if movement.max() <= tol:
            break

    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    assignment = (data @ centroids.T).argmax(axis=1)
    trace.append(float(np.einsum("ij,ij->i", data, centroids[assignment]).mean()))
    return ClusterAssignment(
        assignment=assignment,
        C=C,
        centroids=centroids,
        seed=seed,
        iterations_run=iterations,
        objective_trace=tuple(trace),
    )


def kmeans_objective(features: EmbeddingMatrix, assign: ClusterAssignment) -> float:
    """Mean cosine of each sample to its assigned centroid."""
    if assign.centroids is None:
        raise ValueError("assignment carries no centroids")
    data = features.data.astype(np.float64)
    cents = np.asarray(assign.centroids, dtype=np.float64)
    return float(np.einsum("ij,ij->i", data, cents[assign.assignment]).mean())


def import_assignments(path: str | Path, n_samples: int) -> ClusterAssignment:
    """Read one cluster index per line; C is 1 + the largest index."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) != n_samples:
        raise ValueError(f"{path}: expected {n_samples} lines, found {len(lines)}")
    try:
        values = [int(line) for line in lines]
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer cluster index: {exc}") from None
    if min(values) < 0:
        raise ValueError(f"{path}: cluster indices must be non-negative")
    assignment = np.asarray(values, dtype=np.int64)
    return ClusterAssignment(assignment=assignment, C=int(assignment.max()) + 1)


def save_assignments(assign: ClusterAssignment, path: str | Path) -> None:
    Path(path).write_text(
        "".join(f"{c}\n" for c in assign.assignment), encoding="utf-8"
    )


def _per_cluster_counts(assign: ClusterAssignment, labels: np.ndarray) -> list[np.ndarray]:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size != assign.n_samples:
        raise ValueError("need exactly one reference label per sample")
    _, dense = np.unique(labels, return_inverse=True)
    counts = np.zeros((assign.C, dense.max() + 1), dtype=np.int64)
    np.add.at(counts, (assign.assignment, dense), 1)
    return [counts[c] for c in range(assign.C)]


def cluster_purity(
    assign: ClusterAssignment, ref_labels: Sequence[int] | np.ndarray
) -> tuple[np.ndarray, float]:
    """Majority-label fraction per cluster and its size-weighted mean.

    Empty clusters get NaN and contribute nothing to the mean.
    """
    per_cluster = np.full(assign.C, np.nan)
    for c, counts in enumerate(_per_cluster_counts(assign, np.asarray(ref_labels))):
        size = counts.sum()
        if size:
            per_cluster[c] = counts.max() / size
    sizes = assign.sizes()
    nonempty = sizes > 0
    weighted = float(np.sum(per_cluster[nonempty] * sizes[nonempty]) / sizes.sum())
    return per_cluster, weighted


def cluster_entropy(
    assign: ClusterAssignment, mined_labels: Sequence[int] | np.ndarray
) -> np.ndarray:
    """Shannon entropy (natural log) of labels within each nonempty cluster."""
    out = np.full(assign.C, np.nan)
    for c, counts in enumerate(_per_cluster_counts(assign, np.asarray(mined_labels))):
        size = counts.sum()
        if size:
            p = counts[counts > 0] / size
            out[c] = float(-(p * np.log(p)).sum())
    return out


def redundancy_ratio(cluster_labels: Sequence[int]) -> float:
    """Fraction of distinct mined labels that label more than one cluster."""
    if len(cluster_labels) == 0:
        raise ValueError("need at least one cluster label")
    _, counts = np.unique(np.asarray(cluster_labels), return_counts=True)
    return float((counts > 1).sum() / counts.size)


class ElbowRow(NamedTuple):
    C: int
    n_pos: int
    ratio: float
    redundancy: float


def elbow_sweep(
    features: EmbeddingMatrix,
    text: EmbeddingMatrix,
    corpus,
    C_values: Sequence[int],
    seed: int = 0,
) -> list[ElbowRow]:
    """Run the full cluster-and-vote mining at each C and tabulate fit.

    The useful signal is where n_pos stops growing while n_pos/C keeps
    shrinking and redundancy rises: past that point extra clusters only
    re-vote labels already found.
    """
    from .mining import clustermine, zero_shot_assign

    if not C_values:
        raise ValueError("C_values must be nonempty")
    for C in C_values:
        if C > features.rows:
            raise ValueError(f"C={C} exceeds sample count {features.rows}")
    assign_zs = zero_shot_assign(features, text)
    rows = []
    for C in C_values:
        clusters = spherical_kmeans(features, C, seed=seed)
        mined = clustermine(assign_zs, clusters, corpus)
        rows.append(
            ElbowRow(
                C=C,
                n_pos=len(mined.pos),
                ratio=len(mined.pos) / C,
                redundancy=redundancy_ratio(mined.cluster_labels),
            )
        )
    return rows
