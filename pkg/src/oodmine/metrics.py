"""Detection metrics, mined-label quality metrics, and report shaping.

Score orientation is fixed package-wide: larger score = more in-distribution.
Nothing here auto-flips.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .embedding_io import EmbeddingMatrix, cosine_sim


def _scores(x: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D score list")
    return arr


def auroc(id_scores: Sequence[float], ood_scores: Sequence[float]) -> float:
    """P(id > ood) + 0.5 P(id = ood), computed by average-rank sort."""
    ids = _scores(id_scores, "id_scores")
    oods = _scores(ood_scores, "ood_scores")
    ranks = rankdata(np.concatenate([ids, oods]), method="average")
    id_rank_sum = ranks[: ids.size].sum()
    wins = id_rank_sum - ids.size * (ids.size + 1) / 2.0
    return float(wins / (ids.size * oods.size))


def fpr_at_tpr(
    id_scores: Sequence[float], ood_scores: Sequence[float], tpr: float = 0.95
) -> float:
    """OOD fraction above the loosest threshold that keeps tpr of ID above.

    The threshold is the k-th largest ID score with k = ceil(tpr * n_id);
    Fraction keeps the ceiling exact for decimal tpr values.
    """
    if not 0 < tpr <= 1:
        raise ValueError("tpr must be in (0, 1]")
    ids = _scores(id_scores, "id_scores")
    oods = _scores(ood_scores, "ood_scores")
    k = math.ceil(Fraction(str(tpr)) * ids.size)
    threshold = np.sort(ids)[::-1][k - 1]
    return float((oods >= threshold).mean())


def _fold(labels: Iterable[str]) -> set[str]:
    return {s.strip().casefold() for s in labels if s.strip()}


def label_f1_overlap(pos: Sequence[str], gt: Sequence[str]) -> dict[str, float]:
    """Set overlap |pos∩gt|/|gt| and F1 between pos and gt as folded sets."""
    gt_set = _fold(gt)
    if not gt_set:
        raise ValueError("ground-truth label list is empty")
    pos_set = _fold(pos)
    inter = len(pos_set & gt_set)
    overlap = inter / len(gt_set)
    precision = inter / len(pos_set) if pos_set else 0.0
    recall = overlap
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"overlap": overlap, "f1": f1}


def text_similarity_histogram(
    pos_text: EmbeddingMatrix, gt_text: EmbeddingMatrix, bins: int = 20
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram over [-1, 1] of each pos label's best cosine to any GT label.

    Returns (density, bin_edges) with density summing to 1.  Bins are uniform,
    left-closed right-open, last bin closed (numpy convention).
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    top1 = cosine_sim(pos_text, gt_text).max(axis=1)
    counts, edges = np.histogram(np.clip(top1, -1.0, 1.0), bins=bins, range=(-1.0, 1.0))
    return counts / counts.sum(), edges


@dataclass(frozen=True)
class HierarchyGraph:
    """Undirected simple graph over label strings."""

    adjacency: Mapping[str, frozenset[str]]

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]]) -> "HierarchyGraph":
        adj: dict[str, set[str]] = {}
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        return cls({node: frozenset(nbrs) for node, nbrs in adj.items()})

    @classmethod
    def load(cls, path: str | Path) -> "HierarchyGraph":
        edges = []
        for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{i + 1}: expected 'nodeA<TAB>nodeB'")
            edges.append((parts[0], parts[1]))
        return cls.from_edges(edges)


def hierarchy_hops(
    pos: Sequence[str], gt: Sequence[str], graph: HierarchyGraph
) -> list[float]:
    """Per pos label, the minimum hop count to any GT label (inf if unreachable).

    A single BFS seeded with every GT node gives all minima at once.
    """
    dist: dict[str, int] = {}
    queue: deque[str] = deque()
    for g in gt:
        if g not in dist:
            dist[g] = 0
            queue.append(g)
    while queue:
        node = queue.popleft()
        for nbr in graph.adjacency.get(node, ()):
            if nbr not in dist:
                dist[nbr] = dist[node] + 1
                queue.append(nbr)
    return [float(dist[p]) if p in dist else math.inf for p in pos]


@dataclass(frozen=True)
class EvalReport:
    """Detection quality for one ID-vs-OOD comparison."""

    auroc: float
    fpr_at_95tpr: float
    n_id: int
    n_ood: int
    method: str = ""
    dataset: str = ""
    label_quality: dict | None = None

    def __post_init__(self) -> None:
        for name in ("auroc", "fpr_at_95tpr"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.n_id < 1 or self.n_ood < 1:
            raise ValueError("n_id and n_ood must be positive")

    def to_dict(self) -> dict:
        out = {
            "auroc": self.auroc,
            "fpr_at_95tpr": self.fpr_at_95tpr,
            "n_id": self.n_id,
            "n_ood": self.n_ood,
            "method": self.method,
            "dataset": self.dataset,
        }
        if self.label_quality is not None:
            out["label_quality"] = self.label_quality
        return out

    @classmethod
    def from_dict(cls, payload: Mapping) -> "EvalReport":
        return cls(
            auroc=payload["auroc"],
            fpr_at_95tpr=payload["fpr_at_95tpr"],
            n_id=payload["n_id"],
            n_ood=payload["n_ood"],
            method=payload.get("method", ""),
            dataset=payload.get("dataset", ""),
            label_quality=payload.get("label_quality"),
        )


def evaluate(
    id_scores: Sequence[float],
    ood_scores: Sequence[float],
    method: str = "",
    dataset: str = "",
    tpr: float = 0.95,
    label_quality: dict | None = None,
) -> EvalReport:
    ids = _scores(id_scores, "id_scores")
    oods = _scores(ood_scores, "ood_scores")
    return EvalReport(
        auroc=auroc(ids, oods),
        fpr_at_95tpr=fpr_at_tpr(ids, oods, tpr),
        n_id=int(ids.size),
        n_ood=int(oods.size),
        method=method,
        dataset=dataset,
        label_quality=label_quality,
    )


def robustness_delta(reference: EvalReport, shifted: EvalReport) -> float:
    """Relative AUROC change in percent of the reference."""
    if reference.auroc == 0:
        raise ValueError("reference AUROC is zero; relative delta undefined")
    return 100.0 * (shifted.auroc - reference.auroc) / reference.auroc


def render_report_grid(reports: Sequence[EvalReport]) -> str:
    """Markdown grid: rows = methods, columns = OOD sets plus Mean.

    Cells show percent-scale "AUROC / FPR95" with two decimals, matching
    the usual benchmark-table presentation.
    """
    if not reports:
        raise ValueError("no reports to render")
    methods: list[str] = []
    datasets: list[str] = []
    cells: dict[tuple[str, str], EvalReport] = {}
    for r in reports:
        if r.method not in methods:
            methods.append(r.method)
        if r.dataset not in datasets:
            datasets.append(r.dataset)
        cells[(r.method, r.dataset)] = r

    def fmt(au: float, fpr: float) -> str:
        return f"{100 * au:.2f} / {100 * fpr:.2f}"

    header = "| Method | " + " | ".join(datasets) + " | Mean |"
    rule = "|---" * (len(datasets) + 2) + "|"
    lines = [header, rule]
    for m in methods:
        row = [m]
        aus, fprs = [], []
        for d in datasets:
            r = cells.get((m, d))
            if r is None:
                row.append("-")
            else:
                row.append(fmt(r.auroc, r.fpr_at_95tpr))
                aus.append(r.auroc)
                fprs.append(r.fpr_at_95tpr)
        row.append(fmt(float(np.mean(aus)), float(np.mean(fprs))) if aus else "-")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def save_report_json(reports: Sequence[EvalReport], path: str | Path) -> None:
    per_set = [r.to_dict() for r in reports]
    payload: dict = {"reports": per_set}
    if len(reports) > 1:
        payload["mean"] = {
            "auroc": float(np.mean([r.auroc for r in reports])),
            "fpr_at_95tpr": float(np.mean([r.fpr_at_95tpr for r in reports])),
        }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_report_json(path: str | Path) -> list[EvalReport]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [EvalReport.from_dict(d) for d in payload["reports"]]
