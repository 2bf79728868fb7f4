"""Exporter CLI: `export-text` and `export-images` subcommands.

Exit codes: 0 success, 1 usage error or empty input, 2 model/data failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import EmptyInputError, ExportError
from .export import ExportJob, export_image_embeddings, export_text_embeddings


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sleb-export",
                     description="Export VLM embeddings to SLEB files")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("export-text", help="encode prompted labels")
    p.add_argument("--model", required=True,
                   help="checkpoint id, or mock:<dim> for the offline test encoder")
    p.add_argument("--labels", required=True, help="label file, one per line")
    p.add_argument("--template", required=True,
                   help="prompt template with one {} placeholder")
    p.add_argument("--out", required=True, help="output SLEB path")
    p.add_argument("--out-labels", dest="out_labels",
                   help="optional row-aligned label file copy")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.set_defaults(kind="text")

    p = sub.add_parser("export-images", help="encode an image folder")
    p.add_argument("--model", required=True,
                   help="checkpoint id, or mock:<dim> for the offline test encoder")
    p.add_argument("--dir", required=True, help="image directory")
    p.add_argument("--out", required=True, help="output SLEB path")
    p.add_argument("--manifest", help="output CSV: filename,row,label")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.set_defaults(kind="images")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.kind == "text":
            job = ExportJob(
                model=args.model, input_path=args.labels,
                out_embeddings=args.out, prompt_template=args.template,
                out_labels=args.out_labels, batch_size=args.batch_size,
                device=args.device,
            )
            rows = export_text_embeddings(job)
        else:
            job = ExportJob(
                model=args.model, input_path=args.dir,
                out_embeddings=args.out, out_manifest=args.manifest,
                batch_size=args.batch_size, device=args.device,
            )
            rows = export_image_embeddings(job)
    except EmptyInputError as exc:
        print(f"sleb-export: error: {exc}", file=sys.stderr)
        return 1
    except ExportError as exc:
        print(f"sleb-export: error: {exc}", file=sys.stderr)
        return 2
    print(f"stage=export-{args.kind} rows={rows} model={args.model} out={args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
