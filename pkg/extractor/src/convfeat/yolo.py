"""Bounding-box annotation parsing.

One annotation file per image; each non-blank line reads
``class x_center y_center width height`` with the geometry fields in [0, 1].
Any well-formed box marks the image defective (label 1); an empty file is
defect-free (label 0).
"""

from __future__ import annotations


class AnnotationError(ValueError):
    pass


def derive_label(annotation_text: str) -> int:
    boxes = 0
    for lineno, line in enumerate(annotation_text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 5:
            raise AnnotationError(f"line {lineno}: expected 5 fields, found {len(fields)}")
        try:
            cls = int(fields[0])
        except ValueError:
            raise AnnotationError(
                f"line {lineno}: class id is not an integer: {fields[0]!r}"
            ) from None
        if cls < 0:
            raise AnnotationError(f"line {lineno}: negative class id {cls}")
        names = ("x_center", "y_center", "width", "height")
        for name, raw in zip(names, fields[1:]):
            try:
                value = float(raw)
            except ValueError:
                raise AnnotationError(
                    f"line {lineno}: {name} is not a number: {raw!r}"
                ) from None
            if not 0.0 <= value <= 1.0:
                raise AnnotationError(f"line {lineno}: {name}={raw} outside [0, 1]")
        boxes += 1
    return 1 if boxes else 0
