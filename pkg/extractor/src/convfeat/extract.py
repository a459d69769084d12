"""Directory-to-matrix extraction.

Discovers images in sorted filename order, embeds each with the configured
backbone, derives a binary label from ``<stem>.txt`` in the annotation
directory, and writes three files: the SPFM feature matrix (one row per
image), the label file (one integer per line), and the manifest (one stem
per line, in matrix row order). Undecodable images are skipped with a
warning and recorded as ``# skipped ...`` comment lines at the end of the
manifest; a missing annotation file labels the image defect-free with a
warning. Re-running on unchanged inputs reproduces all three files
byte-for-byte.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backbone import Backbone
from .spfm import write_matrix
from .yolo import AnnotationError, derive_label

IMAGE_SUFFIXES = (".bmp", ".gif", ".jpeg", ".jpg", ".png", ".tif", ".tiff", ".webp")
TARGET_SIZE = (256, 256)


@dataclass
class ExtractorConfig:
    image_dir: str
    annotation_dir: str
    out_matrix: str
    out_labels: str
    out_manifest: str
    backbone: str = "vgg19"
    target_size: tuple[int, int] = TARGET_SIZE

    def validate(self) -> None:
        if tuple(self.target_size) != TARGET_SIZE:
            raise ValueError(f"target_size is fixed at {TARGET_SIZE}")
        if not Path(self.image_dir).is_dir():
            raise FileNotFoundError(f"image directory does not exist: {self.image_dir}")
        if not Path(self.annotation_dir).is_dir():
            raise FileNotFoundError(
                f"annotation directory does not exist: {self.annotation_dir}"
            )


def discover_images(image_dir) -> list[Path]:
    image_dir = Path(image_dir)
    return sorted(
        (p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.name,
    )


def _label_for(stem: str, annotation_dir: Path) -> int:
    path = annotation_dir / f"{stem}.txt"
    if not path.exists():
        warnings.warn(f"no annotation file for {stem!r}; labeling as defect-free")
        return 0
    try:
        return derive_label(path.read_text(encoding="utf-8"))
    except AnnotationError as exc:
        raise AnnotationError(f"{path}: {exc}") from None


def extract(cfg: ExtractorConfig) -> int:
    """Run the extraction; returns the number of matrix rows written."""
    cfg.validate()
    paths = discover_images(cfg.image_dir)
    if not paths:
        raise FileNotFoundError(f"no images found under {cfg.image_dir}")
    backbone = Backbone(cfg.backbone)
    annotation_dir = Path(cfg.annotation_dir)

    rows: list[np.ndarray] = []
    labels: list[int] = []
    stems: list[str] = []
    skipped: list[str] = []
    for path in paths:
        try:
            with Image.open(path) as image:
                row = backbone.embed(image, tuple(cfg.target_size))
        except (UnidentifiedImageError, OSError) as exc:
            warnings.warn(f"skipping undecodable image {path.name}: {exc}")
            skipped.append(f"# skipped {path.stem}: undecodable image")
            continue
        rows.append(row)
        labels.append(_label_for(path.stem, annotation_dir))
        stems.append(path.stem)

    if not rows:
        raise FileNotFoundError(f"no decodable images under {cfg.image_dir}")
    matrix = np.vstack(rows)
    if not np.isfinite(matrix).all():
        raise ValueError("backbone produced non-finite features")

    write_matrix(matrix, cfg.out_matrix)
    with open(cfg.out_labels, "w", encoding="utf-8") as fh:
        fh.writelines(f"{label}\n" for label in labels)
    with open(cfg.out_manifest, "w", encoding="utf-8") as fh:
        fh.writelines(f"{stem}\n" for stem in stems)
        fh.writelines(f"{line}\n" for line in skipped)
    return matrix.shape[0]
