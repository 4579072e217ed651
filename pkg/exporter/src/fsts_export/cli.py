"""fsts-export: encode an image folder tree into an FSTS feature file."""

from __future__ import annotations

import argparse
import logging
import sys

from .encoders import EncoderError, make_encoder
from .export import ExportError, export_folder, load_templates


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fsts-export",
        description="Run a vision-language encoder over a folder-per-class image "
        "tree and write an FSTS feature file plus JSON manifest.",
    )
    p.add_argument("--images", required=True, help="root directory, one subfolder per class")
    p.add_argument("--out", required=True, help="output .fsts path")
    p.add_argument(
        "--prompts",
        default=None,
        help="JSON file mapping class name to prompt text (or list of prompts); "
        "must cover every class",
    )
    p.add_argument(
        "--template",
        default="photo",
        help=f"bundled prompt template to fill when no prompts file is given "
        f"(one of: {', '.join(sorted(load_templates()))})",
    )
    p.add_argument("--encoder", default="clip", choices=["clip", "hash"])
    p.add_argument("--model", default="openai/clip-vit-base-patch32",
                   help="model name for the clip encoder")
    p.add_argument("--feat-dim", type=int, default=64, help="hash encoder feature dim")
    p.add_argument("--text-dim", type=int, default=64, help="hash encoder text dim")
    p.add_argument("--split", default="test", choices=["base", "val", "test"],
                   help="split tag applied to every class")
    p.add_argument("--splits-file", default=None,
                   help="JSON class->split overriding --split per class")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.encoder == "hash":
            encoder = make_encoder("hash", feat_dim=args.feat_dim, text_dim=args.text_dim)
        else:
            encoder = make_encoder("clip", model_name=args.model)
        result = export_folder(
            args.images,
            args.out,
            encoder,
            prompts_file=args.prompts,
            template_name=args.template,
            split=args.split,
            splits_file=args.splits_file,
        )
    except (ExportError, EncoderError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rows = ", ".join(str(result.rows_per_class[c]) for c in result.classes)
    print(f"wrote {len(result.classes)} classes (rows: {rows}) to {result.path}")
    if result.n_skipped:
        print(f"skipped {result.n_skipped} unreadable image(s)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
