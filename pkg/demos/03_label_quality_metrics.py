"""Diagnosing a mined label set beyond plain detection AUROC.

Shows the label-quality toolbox on one synthetic instance: set overlap
and F1 against the planted labels, the best-cosine histogram between
mined and true label embeddings, cluster purity/entropy, the redundancy
elbow over cluster counts, and hop distance through a label hierarchy.

Run:  python3 demos/03_label_quality_metrics.py
"""

import numpy as np

from oodmine import (
    Corpus,
    HierarchyGraph,
    PlantedParams,
    cluster_entropy,
    cluster_purity,
    clustermine,
    elbow_sweep,
    generate_planted_instance,
    hierarchy_hops,
    label_f1_overlap,
    spherical_kmeans,
    text_similarity_histogram,
    zero_shot_assign,
)
from oodmine.embedding_io import EmbeddingMatrix

inst = generate_planted_instance(PlantedParams(
    n_concepts=12, samples_per_concept=120, n_distractors=188,
    dims=64, margin=0.15, noise=0.08, seed=7, n_ood=0,
))
corpus = Corpus(inst.labels)
assign = zero_shot_assign(inst.images, inst.text)
clusters = spherical_kmeans(inst.images, C=24, seed=7)
mined = clustermine(assign, clusters, corpus)
mined_names = [corpus.labels[i] for i in mined.pos]

quality = label_f1_overlap(mined_names, inst.planted_labels)
print(f"overlap {quality['overlap']:.3f}   f1 {quality['f1']:.3f}")

# where do the mined labels sit relative to the true ones in text space?
pos_text = EmbeddingMatrix(inst.text.data[np.asarray(mined.pos)])
gt_text = EmbeddingMatrix(inst.text.data[: len(inst.planted_labels)])
density, edges = text_similarity_histogram(pos_text, gt_text, bins=10)
print("best-cosine histogram (mined vs planted):")
for d, lo, hi in zip(density, edges[:-1], edges[1:]):
    if d > 0:
        print(f"  [{lo:+.1f},{hi:+.1f})  {'#' * int(round(40 * d))}  {d:.2f}")

# cluster diagnostics against the hidden ground truth
purity, mean_purity = cluster_purity(clusters, inst.true_concept)
entropy = cluster_entropy(clusters, assign.top1)
print(f"cluster purity: mean {mean_purity:.3f}, "
      f"min {np.nanmin(purity):.3f}; "
      f"vote entropy: max {max(0.0, float(np.nanmax(entropy))):.3f} nats")

# elbow trace: positives saturate while redundancy climbs
print(f"{'C':>4} {'n_pos':>6} {'n_pos/C':>8} {'redundancy':>11}")
for row in elbow_sweep(inst.images, inst.text, corpus, [12, 24, 48, 96], seed=7):
    print(f"{row.C:>4} {row.n_pos:>6} {row.ratio:>8.3f} {row.redundancy:>11.3f}")

# hop distance through a toy hierarchy: how far off are near-misses?
labels = ["terrier", "dog", "animal", "cat", "car"]
graph = HierarchyGraph.from_edges([
    ("terrier", "dog"), ("dog", "animal"), ("cat", "animal"),
])
hops = hierarchy_hops(labels, ["terrier"], graph)
for label, h in zip(labels, hops):
    print(f"  {label:>8}: {'unreachable' if np.isinf(h) else int(h)} hops from gt")
