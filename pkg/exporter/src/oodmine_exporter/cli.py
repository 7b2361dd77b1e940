"""Command line: export-images / export-text.

Exit codes follow the consumer's convention: 0 success, 1 runtime
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ExportJob, export_images, export_text


def cmd_images(args: argparse.Namespace) -> int:
    job = ExportJob(
        model_id=args.model,
        out_embeddings=Path(args.out),
        out_manifest=Path(args.manifest),
        images=tuple(Path(p) for p in args.images or ()),
        image_dir=Path(args.image_dir) if args.image_dir else None,
        batch_size=args.batch_size,
        device=args.device,
    )
    rows = export_images(job)
    print(f"wrote {rows} rows to {args.out}")
    return 0


def cmd_text(args: argparse.Namespace) -> int:
    job = ExportJob(
        model_id=args.model,
        out_embeddings=Path(args.out),
        out_manifest=Path(args.manifest),
        corpus_file=Path(args.corpus),
        prompt_set=args.prompts,
        batch_size=args.batch_size,
        device=args.device,
    )
    rows = export_text(job)
    print(f"wrote {rows} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodmine-export",
        description="Export CLIP image/text embeddings as EMB1 files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-images", help="embed an image directory or file list")
    p.add_argument("--model", required=True, help="checkpoint path or hub id")
    p.add_argument("--images", nargs="+", help="explicit image files, kept in order")
    p.add_argument("--image-dir", help="directory scanned in sorted name order")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True, help="EMB1 output path")
    p.add_argument("--manifest", required=True, help="row-order manifest path")
    p.set_defaults(func=cmd_images)

    p = sub.add_parser("export-text", help="embed label-major prompt expansions")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True, help="one label per line")
    p.add_argument("--prompts", default="simple", help='"simple" or a JSON array file')
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_text)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(sys.argv[1:] if argv is None else argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"oodmine-export: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
