"""Command-line entry point: one ``extract`` run per invocation."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .backbone import BACKBONES, BackboneError
from .extract import ExtractorConfig, extract
from .yolo import AnnotationError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convfeat",
        description="Extract CNN features from an annotated image directory "
        "into an SPFM matrix, label file, and manifest.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--images", required=True, help="image directory")
    parser.add_argument("--annotations", required=True, help="annotation directory")
    parser.add_argument("--backbone", choices=BACKBONES, default="vgg19")
    parser.add_argument("--out-matrix", required=True)
    parser.add_argument("--out-labels", required=True)
    parser.add_argument("--out-manifest", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExtractorConfig(
        image_dir=args.images,
        annotation_dir=args.annotations,
        out_matrix=args.out_matrix,
        out_labels=args.out_labels,
        out_manifest=args.out_manifest,
        backbone=args.backbone,
    )
    try:
        n_rows = extract(cfg)
    except (AnnotationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BackboneError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {n_rows} feature rows")
    return 0


if __name__ == "__main__":
    sys.exit(main())
