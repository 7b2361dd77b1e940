"""Corpus-driven label mining and scoring for embedding-space OOD detection.

Pipeline overview: ingest a label corpus, embed it with any CLIP-style
encoder (see the separate exporter package), mine positive/negative label
sets from in-distribution image embeddings, score query images with the
positive/negative softmax, and evaluate with AUROC / FPR95.
"""

from . import _threads  # noqa: F401  (thread caps before numpy loads)

from .clustering import (
    ClusterAssignment,
    ElbowRow,
    cluster_entropy,
    cluster_purity,
    elbow_sweep,
    import_assignments,
    kmeans_objective,
    redundancy_ratio,
    save_assignments,
    spherical_kmeans,
)
from .corpus import (
    SIMPLE_PROMPTS,
    Corpus,
    DedupPolicy,
    EmptyCorpusError,
    PromptSet,
    aggregate_prompt_embeddings,
    expand_prompts,
    ingest_corpus,
    load_corpus,
    load_prompt_set,
)
from .embedding_io import (
    BadMagicError,
    EmbeddingFormatError,
    EmbeddingMatrix,
    NonFiniteValueError,
    RenormalizationWarning,
    TruncatedPayloadError,
    UnsupportedVersionError,
    ZeroNormRowError,
    cosine_sim,
    load_embeddings,
    load_labels,
    normalize_rows,
    save_embeddings,
    save_labels,
)
from .metrics import (
    EvalReport,
    HierarchyGraph,
    auroc,
    evaluate,
    fpr_at_tpr,
    hierarchy_hops,
    label_f1_overlap,
    render_report_grid,
    robustness_delta,
    text_similarity_histogram,
)
from .mining import (
    EmptyPositiveSetError,
    MinedLabelSets,
    ZeroShotAssignment,
    clustermine,
    complement_negatives,
    from_ground_truth,
    group_negatives,
    load_mined,
    negative_mine,
    posmine,
    save_mined,
    zero_shot_assign,
)
from .scoring import (
    ScoreConfig,
    score_energy,
    score_grouped,
    score_maxlogit,
    score_mcm,
    score_posneg,
)
from .synth import (
    GenerationInfeasibleError,
    PlantedInstance,
    PlantedParams,
    generate_planted_instance,
    observed_margin,
    write_instance,
)

__version__ = "0.1.0"

__all__ = [
    "BadMagicError",
    "ClusterAssignment",
    "Corpus",
    "DedupPolicy",
    "ElbowRow",
    "EmbeddingFormatError",
    "EmbeddingMatrix",
    "EmptyCorpusError",
    "EmptyPositiveSetError",
    "EvalReport",
    "GenerationInfeasibleError",
    "HierarchyGraph",
    "MinedLabelSets",
    "NonFiniteValueError",
    "PlantedInstance",
    "PlantedParams",
    "PromptSet",
    "RenormalizationWarning",
    "SIMPLE_PROMPTS",
    "ScoreConfig",
    "TruncatedPayloadError",
    "UnsupportedVersionError",
    "ZeroNormRowError",
    "ZeroShotAssignment",
    "aggregate_prompt_embeddings",
    "auroc",
    "cluster_entropy",
    "cluster_purity",
    "clustermine",
    "complement_negatives",
    "cosine_sim",
    "elbow_sweep",
    "evaluate",
    "expand_prompts",
    "fpr_at_tpr",
    "from_ground_truth",
    "generate_planted_instance",
    "group_negatives",
    "hierarchy_hops",
    "import_assignments",
    "ingest_corpus",
    "kmeans_objective",
    "label_f1_overlap",
    "load_corpus",
    "load_embeddings",
    "load_labels",
    "load_mined",
    "load_prompt_set",
    "negative_mine",
    "normalize_rows",
    "observed_margin",
    "posmine",
    "redundancy_ratio",
    "render_report_grid",
    "robustness_delta",
    "save_assignments",
    "save_embeddings",
    "save_labels",
    "save_mined",
    "score_energy",
    "score_grouped",
    "score_maxlogit",
    "score_mcm",
    "score_posneg",
    "spherical_kmeans",
    "text_similarity_histogram",
    "write_instance",
    "zero_shot_assign",
]
