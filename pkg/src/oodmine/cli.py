"""Command-line pipeline: ingest -> cluster -> mine -> score -> eval.

Stages communicate only through files (EMB1, label text, JSON, CSV) and
every command is a pure function of its inputs and flags, so re-runs are
byte-identical.  Errors exit 1 with a message on stderr; bad usage exits 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import _threads  # noqa: F401  (sets thread caps before numpy loads)

import numpy as np

from .clustering import (
    elbow_sweep,
    import_assignments,
    save_assignments,
    spherical_kmeans,
)
from .corpus import (
    DedupPolicy,
    aggregate_prompt_embeddings,
    ingest_corpus,
    load_corpus,
    load_prompt_set,
)
from .embedding_io import EmbeddingMatrix, load_embeddings, save_embeddings, save_labels
from .metrics import (
    auroc,
    evaluate,
    fpr_at_tpr,
    label_f1_overlap,
    load_report_json,
    render_report_grid,
    save_report_json,
)
from .mining import (
    MinedLabelSets,
    clustermine,
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
from .synth import PlantedParams, generate_planted_instance, write_instance


def _write_scores(scores: np.ndarray, path: str | Path) -> None:
    lines = ["index,score"]
    lines.extend(f"{i},{s:.17g}" for i, s in enumerate(scores))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_scores(path: str | Path) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "index,score":
        raise ValueError(f"{path}: missing 'index,score' header")
    values = []
    for i, line in enumerate(lines[1:]):
        idx, _, score = line.partition(",")
        if int(idx) != i:
            raise ValueError(f"{path}: row {i} has index {idx}")
        values.append(float(score))
    if not values:
        raise ValueError(f"{path}: no scores")
    return np.asarray(values, dtype=np.float64)


def _write_csv(header: str, rows: list[str], path: str | Path) -> None:
    Path(path).write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")


def _load_corpus_text(corpus_path: str, text_path: str):
    corpus = load_corpus(corpus_path, DedupPolicy.DUPLICATES_ONE_LEMMA)
    text = load_embeddings(text_path)
    if text.rows != len(corpus):
        raise ValueError(
            f"text embeddings have {text.rows} rows but corpus has {len(corpus)} labels"
        )
    return corpus, text


def _rows(matrix: EmbeddingMatrix, indices) -> EmbeddingMatrix | None:
    indices = np.asarray(list(indices), dtype=np.int64)
    if indices.size == 0:
        return None
    return EmbeddingMatrix(matrix.data[indices])


def cmd_ingest(args: argparse.Namespace) -> int:
    raw = Path(args.input).read_text(encoding="utf-8")
    corpus = ingest_corpus(raw.split("\n"), DedupPolicy(args.policy), args.source_tag)
    save_labels(corpus.labels, args.out)
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    features = load_embeddings(args.emb)
    if args.import_assign:
        assign = import_assignments(args.import_assign, features.rows)
    else:
        assign = spherical_kmeans(
            features, args.clusters, seed=args.seed, max_iter=args.max_iter, tol=args.tol
        )
    save_assignments(assign, args.out)
    if args.centroids_out and assign.centroids is not None:
        save_embeddings(EmbeddingMatrix.from_array(assign.centroids), args.centroids_out)
    return 0


def cmd_mine(args: argparse.Namespace) -> int:
    corpus, text = _load_corpus_text(args.corpus, args.text)
    if args.miner == "posmine":
        images = load_embeddings(args.img)
        mined = posmine(zero_shot_assign(images, text), corpus, args.min_count)
    elif args.miner == "clustermine":
        images = load_embeddings(args.img)
        clusters = import_assignments(args.assign, images.rows)
        mined = clustermine(zero_shot_assign(images, text), clusters, corpus)
    else:  # neg
        if args.mined:
            base = load_mined(args.mined)
        elif args.pos_labels:
            gt = Path(args.pos_labels).read_text(encoding="utf-8").splitlines()
            base = from_ground_truth(corpus, gt)
        else:
            raise ValueError("mine neg needs --mined or --pos-labels")
        pos_text = _rows(text, base.pos)
        candidates = np.asarray(base.neg, dtype=np.int64)
        if pos_text is None or candidates.size == 0:
            raise ValueError("mine neg needs nonempty pos and neg sets")
        keep = negative_mine(
            pos_text, _rows(text, candidates), args.k, args.percentile
        )
        mined = MinedLabelSets(
            pos=base.pos,
            neg=tuple(int(i) for i in candidates[keep]),
            method=base.method,
            params={**base.params, "K": args.k, "percentile": args.percentile},
        )
    save_mined(mined, args.out, corpus)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    corpus, text = _load_corpus_text(args.corpus, args.text)
    images = load_embeddings(args.img)
    if images.dims != text.dims:
        raise ValueError("image and text embedding dims differ")
    mined = load_mined(args.mined)
    pos_text = _rows(text, mined.pos)
    if pos_text is None:
        raise ValueError("mined set has no positive labels")
    cfg = ScoreConfig(tau=args.tau) if args.method != "maxlogit" else ScoreConfig()
    if args.method == "posneg":
        scores = score_posneg(images, pos_text, _rows(text, mined.neg), cfg)
    elif args.method == "grouped":
        groups = [
            g for g in group_negatives(mined.neg, args.group_size, args.seed)
        ]
        neg_groups = [m for m in (_rows(text, g) for g in groups) if m is not None]
        if not neg_groups:
            scores = score_posneg(images, pos_text, None, cfg)
        else:
            scores = score_grouped(images, pos_text, neg_groups, cfg)
    elif args.method == "mcm":
        scores = score_mcm(images, pos_text, cfg)
    elif args.method == "maxlogit":
        scores = score_maxlogit(images, pos_text)
    else:
        scores = score_energy(images, pos_text, cfg)
    _write_scores(scores, args.out)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    id_scores = _read_scores(args.id)
    label_quality = None
    if args.pos_labels and args.gt_labels:
        pos = Path(args.pos_labels).read_text(encoding="utf-8").splitlines()
        gt = Path(args.gt_labels).read_text(encoding="utf-8").splitlines()
        label_quality = label_f1_overlap(pos, gt)
    reports = []
    for spec_str in args.ood:
        name, _, path = spec_str.rpartition("=")
        if not name:
            name, path = Path(path).stem, path
        reports.append(
            evaluate(
                id_scores,
                _read_scores(path),
                method=args.method,
                dataset=name,
                tpr=args.tpr,
                label_quality=label_quality,
            )
        )
    save_report_json(reports, args.out)
    if args.markdown:
        Path(args.markdown).write_text(render_report_grid(reports), encoding="utf-8")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    reports = []
    for path in args.eval:
        reports.extend(load_report_json(path))
    table = render_report_grid(reports)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    else:
        sys.stdout.write(table)
    return 0


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def cmd_sweep(args: argparse.Namespace) -> int:
    corpus, text = _load_corpus_text(args.corpus, args.text)
    if args.kind == "elbow":
        features = load_embeddings(args.img)
        rows = elbow_sweep(features, text, corpus, _int_list(args.c_values), args.seed)
        _write_csv(
            "C,n_pos,ratio,redundancy",
            [f"{r.C},{r.n_pos},{r.ratio:.17g},{r.redundancy:.17g}" for r in rows],
            args.out,
        )
    elif args.kind == "neg-k":
        id_images = load_embeddings(args.img)
        ood_images = load_embeddings(args.img_ood)
        mined = load_mined(args.mined)
        pos_text = _rows(text, mined.pos)
        candidates = np.asarray(mined.neg, dtype=np.int64)
        if pos_text is None or candidates.size == 0:
            raise ValueError("sweep neg-k needs nonempty pos and neg sets")
        cand_text = _rows(text, candidates)
        cfg = ScoreConfig(tau=args.tau)
        out_rows = []
        for k in _int_list(args.k_values):
            keep = negative_mine(pos_text, cand_text, k, args.percentile)
            neg_text = _rows(text, candidates[keep])
            sid = score_posneg(id_images, pos_text, neg_text, cfg)
            sood = score_posneg(ood_images, pos_text, neg_text, cfg)
            out_rows.append(
                f"{k},{keep.size},{auroc(sid, sood):.17g},{fpr_at_tpr(sid, sood):.17g}"
            )
        _write_csv("K,n_neg,auroc,fpr_at_95tpr", out_rows, args.out)
    else:  # min-count
        images = load_embeddings(args.img)
        assign = zero_shot_assign(images, text)
        out_rows = []
        for m in _int_list(args.m_values):
            mined = posmine(assign, corpus, m)
            out_rows.append(f"{m},{len(mined.pos)}")
        _write_csv("M,n_pos", out_rows, args.out)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    params = PlantedParams(
        n_concepts=args.n_concepts,
        samples_per_concept=args.samples_per_concept,
        n_distractors=args.n_distractors,
        dims=args.dims,
        margin=args.margin,
        noise=args.noise,
        seed=args.seed,
        n_ood=args.n_ood,
        ood_mode=args.ood_mode,
    )
    write_instance(generate_planted_instance(params), args.out_dir)
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus, DedupPolicy.DUPLICATES_ONE_LEMMA)
    prompts = load_prompt_set(args.prompts)
    per_query = load_embeddings(args.queries)
    out = aggregate_prompt_embeddings(per_query, len(corpus), len(prompts))
    save_embeddings(out, args.out)
    return 0


def cmd_run_all(args: argparse.Namespace) -> int:
    cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    method = cfg.get("method", "clustermine")
    seed = int(cfg.get("seed", 0))
    argv: list[str]
    mined_path = out_dir / "mined.json"
    if method == "clustermine":
        assign_path = out_dir / "assign.txt"
        run(
            [
                "cluster",
                "--emb", cfg["img"],
                "--clusters", str(cfg.get("C", 4000)),
                "--seed", str(seed),
                "--out", str(assign_path),
            ]
        )
        argv = [
            "mine", "clustermine",
            "--img", cfg["img"],
            "--text", cfg["text"],
            "--corpus", cfg["corpus"],
            "--assign", str(assign_path),
            "--out", str(mined_path),
        ]
    elif method == "posmine":
        argv = [
            "mine", "posmine",
            "--img", cfg["img"],
            "--text", cfg["text"],
            "--corpus", cfg["corpus"],
            "--min-count", str(cfg.get("M", 100)),
            "--out", str(mined_path),
        ]
    else:
        raise ValueError(f"run-all method must be posmine or clustermine, got {method!r}")
    run(argv)
    if "K" in cfg:
        pruned_path = out_dir / "mined_pruned.json"
        run(
            [
                "mine", "neg",
                "--text", cfg["text"],
                "--corpus", cfg["corpus"],
                "--mined", str(mined_path),
                "--k", str(cfg["K"]),
                "--percentile", str(cfg.get("percentile", 0.95)),
                "--out", str(pruned_path),
            ]
        )
        mined_path = pruned_path
    tau = str(cfg.get("tau", 0.001))
    score_common = [
        "--text", cfg["text"],
        "--corpus", cfg["corpus"],
        "--mined", str(mined_path),
        "--tau", tau,
    ]
    scorer = ["score", "grouped", "--group-size", str(cfg["group_size"]), "--seed", str(seed)] if cfg.get("group_size") else ["score", "posneg"]
    id_csv = out_dir / "scores_id.csv"
    run([*scorer, "--img", cfg["img"], *score_common, "--out", str(id_csv)])
    ood_specs = []
    for name, path in sorted(cfg.get("ood", {}).items()):
        ood_csv = out_dir / f"scores_ood_{name}.csv"
        run([*scorer, "--img", path, *score_common, "--out", str(ood_csv)])
        ood_specs.append(f"{name}={ood_csv}")
    if ood_specs:
        run(
            [
                "eval",
                "--id", str(id_csv),
                *[f for spec_str in ood_specs for f in ("--ood", spec_str)],
                "--method", method,
                "--out", str(out_dir / "report.json"),
                "--markdown", str(out_dir / "report.md"),
            ]
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodmine",
        description="Corpus-driven label mining and scoring for embedding-space OOD detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a raw label corpus file")
    p.add_argument("--input", required=True)
    p.add_argument(
        "--policy",
        default=DedupPolicy.NO_DUPLICATES_ONE_LEMMA.value,
        choices=[x.value for x in DedupPolicy],
    )
    p.add_argument("--source-tag", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="spherical k-means over image embeddings")
    p.add_argument("--emb", required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--clusters", type=int)
    source.add_argument(
        "--import-assign", help="adopt an externally produced assignment file"
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--centroids-out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("mine", help="extract positive/negative label sets")
    psub = p.add_subparsers(dest="miner", required=True)
    for miner in ("posmine", "clustermine", "neg"):
        pm = psub.add_parser(miner)
        pm.add_argument("--text", required=True)
        pm.add_argument("--corpus", required=True)
        pm.add_argument("--out", required=True)
        if miner in ("posmine", "clustermine"):
            pm.add_argument("--img", required=True)
        if miner == "posmine":
            pm.add_argument("--min-count", type=int, default=100)
        if miner == "clustermine":
            pm.add_argument("--assign", required=True)
        if miner == "neg":
            pm.add_argument("--mined")
            pm.add_argument("--pos-labels")
            pm.add_argument("--k", type=int, default=40000)
            pm.add_argument("--percentile", type=float, default=0.95)
        pm.set_defaults(func=cmd_mine)

    p = sub.add_parser("score", help="score images against a mined label set")
    p.add_argument("method", choices=["posneg", "grouped", "mcm", "maxlogit", "energy"])
    p.add_argument("--img", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--mined", required=True)
    p.add_argument("--tau", type=float, default=0.001)
    p.add_argument("--group-size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="AUROC / FPR95 from score CSVs")
    p.add_argument("--id", required=True)
    p.add_argument("--ood", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--method", default="")
    p.add_argument("--tpr", type=float, default=0.95)
    p.add_argument("--pos-labels")
    p.add_argument("--gt-labels")
    p.add_argument("--markdown")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="merge eval JSONs into a markdown grid")
    p.add_argument("--eval", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="parameter sweeps emitting CSV tables")
    ssub = p.add_subparsers(dest="kind", required=True)
    pe = ssub.add_parser("elbow")
    pe.add_argument("--img", required=True)
    pe.add_argument("--text", required=True)
    pe.add_argument("--corpus", required=True)
    pe.add_argument("--c-values", required=True, help="comma-separated cluster counts")
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_sweep)
    pk = ssub.add_parser("neg-k")
    pk.add_argument("--img", required=True, help="ID image embeddings")
    pk.add_argument("--img-ood", required=True)
    pk.add_argument("--text", required=True)
    pk.add_argument("--corpus", required=True)
    pk.add_argument("--mined", required=True)
    pk.add_argument("--k-values", required=True)
    pk.add_argument("--percentile", type=float, default=0.95)
    pk.add_argument("--tau", type=float, default=0.001)
    pk.add_argument("--out", required=True)
    pk.set_defaults(func=cmd_sweep)
    pm = ssub.add_parser("min-count")
    pm.add_argument("--img", required=True)
    pm.add_argument("--text", required=True)
    pm.add_argument("--corpus", required=True)
    pm.add_argument("--m-values", required=True)
    pm.add_argument("--out", required=True)
    pm.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a planted-concept synthetic instance")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-concepts", type=int, default=20)
    p.add_argument("--samples-per-concept", type=int, default=200)
    p.add_argument("--n-distractors", type=int, default=480)
    p.add_argument("--dims", type=int, default=64)
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-ood", type=int, default=1000)
    p.add_argument("--ood-mode", default="fresh", choices=["fresh", "near_distractors"])
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("aggregate", help="collapse per-query prompt embeddings per label")
    p.add_argument("--queries", required=True, help="label-major per-query EMB1 file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--prompts", default="simple")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("run-all", help="chain the full pipeline from one JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run_all)

    return parser


def run(argv: list[str]) -> int:
    """Parse and execute; raises on runtime errors (used by run-all)."""
    args = build_parser().parse_args(argv)
    return args.func(args)


def main(argv: list[str] | None = None) -> int:
    try:
        return run(sys.argv[1:] if argv is None else argv)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"oodmine: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
