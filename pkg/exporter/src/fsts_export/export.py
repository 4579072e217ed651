"""Folder-tree export to the FSTS feature-file format.

Layout expectation: one subdirectory per class under the images root, any
mix of common image formats inside. Each class gets one text embedding
(the normalized mean over its prompt embeddings) and one feature row per
readable image. The binary layout matches the FSTS format documented by
the consumer library byte for byte; a JSON manifest sidecar records the
split tags, encoder, template and normalization.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

FSTS_MAGIC = b"FSTS"
FSTS_VERSION = 1
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp", ".tiff"}


class ExportError(RuntimeError):
    pass


def load_templates() -> dict[str, str]:
    return json.loads(files("fsts_export").joinpath("prompts/templates.json").read_text())


def resolve_prompts(
    class_names: list[str],
    prompts_file: Path | None,
    template_name: str,
) -> dict[str, list[str]]:
    """One or more prompt strings per class.

    A prompts file (JSON: class -> string or list of strings) must cover
    every class; without one, the named template is filled per class.
    """
    if prompts_file is not None:
        raw = json.loads(Path(prompts_file).read_text())
        missing = sorted(set(class_names) - set(raw))
        if missing:
            raise ExportError(f"classes missing prompts: {', '.join(missing)}")
        return {
            name: [raw[name]] if isinstance(raw[name], str) else list(raw[name])
            for name in class_names
        }
    templates = load_templates()
    if template_name not in templates:
        raise ExportError(
            f"unknown template {template_name!r}; bundled: {', '.join(sorted(templates))}"
        )
    pattern = templates[template_name]
    return {name: [pattern.replace("{class}", name)] for name in class_names}


@dataclass
class ExportResult:
    path: Path
    classes: list[str]
    rows_per_class: dict[str, int]
    skipped: dict[str, int] = field(default_factory=dict)

    @property
    def n_skipped(self) -> int:
        return sum(self.skipped.values())


def _class_dirs(images_root: Path) -> list[Path]:
    root = Path(images_root)
    if not root.is_dir():
        raise ExportError(f"images root {root} is not a directory")
    dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not dirs:
        raise ExportError(f"no class subdirectories under {root}")
    return dirs


def _image_files(class_dir: Path) -> list[Path]:
    return sorted(p for p in class_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def export_folder(
    images_root,
    out_path,
    encoder,
    prompts_file=None,
    template_name: str = "photo",
    split: str = "test",
    splits_file=None,
) -> ExportResult:
    """Encode every class folder and write FSTS + manifest atomically.

    Unreadable images are skipped with a logged warning count; a class
    whose images are all unreadable is an error. Deterministic encoders
    make re-exports byte-identical.
    """
    out_path = Path(out_path)
    class_dirs = _class_dirs(images_root)
    class_names = [d.name for d in class_dirs]
    prompts = resolve_prompts(class_names, prompts_file, template_name)

    splits = {name: split for name in class_names}
    if splits_file is not None:
        overrides = json.loads(Path(splits_file).read_text())
        unknown = sorted(set(overrides) - set(class_names))
        if unknown:
            raise ExportError(f"splits file lists unknown classes: {', '.join(unknown)}")
        splits.update(overrides)

    per_class_rows: dict[str, np.ndarray] = {}
    per_class_text: dict[str, np.ndarray] = {}
    skipped: dict[str, int] = {}
    for class_dir in class_dirs:
        name = class_dir.name
        rows = []
        bad = 0
        for image_path in _image_files(class_dir):
            try:
                rows.append(encoder.encode_image(image_path))
            except Exception:
                bad += 1
                logger.warning("skipping unreadable image %s", image_path)
        if bad:
            skipped[name] = bad
        if not rows:
            raise ExportError(f"class {name!r}: no readable images")
        per_class_rows[name] = np.stack(rows)

        prompt_embeddings = np.stack([encoder.encode_text(p) for p in prompts[name]])
        mean_embedding = prompt_embeddings.mean(axis=0)
        per_class_text[name] = mean_embedding / np.linalg.norm(mean_embedding)

    feat_dim = per_class_rows[class_names[0]].shape[1]
    text_dim = per_class_text[class_names[0]].shape[0]

    chunks = [FSTS_MAGIC, struct.pack("<IIII", FSTS_VERSION, len(class_names), feat_dim, text_dim)]
    for name in class_names:
        label = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(label)))
        chunks.append(label)
        chunks.append(struct.pack("<I", per_class_rows[name].shape[0]))
        chunks.append(np.ascontiguousarray(per_class_text[name], dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(per_class_rows[name], dtype="<f4").tobytes())

    manifest = {
        "format": "FSTS",
        "version": FSTS_VERSION,
        "splits": splits,
        "provenance": {
            "tool": "fsts-export",
            "encoder": getattr(encoder, "model_name", encoder.name),
            "template": None if prompts_file else template_name,
            "prompts_file": str(prompts_file) if prompts_file else None,
            "normalization": "unit-l2",
            "skipped_images": skipped,
        },
    }

    # atomic: write both files to temp names, then rename into place
    tmp_bin = out_path.with_name(out_path.name + ".tmp")
    tmp_bin.write_bytes(b"".join(chunks))
    manifest_path = out_path.with_suffix(".json")
    tmp_manifest = manifest_path.with_name(manifest_path.name + ".tmp")
    tmp_manifest.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    os.replace(tmp_bin, out_path)
    os.replace(tmp_manifest, manifest_path)

    return ExportResult(
        path=out_path,
        classes=class_names,
        rows_per_class={name: int(per_class_rows[name].shape[0]) for name in class_names},
        skipped=skipped,
    )
