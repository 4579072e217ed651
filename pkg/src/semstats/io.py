"""FSTS feature-file reader/writer.

Binary layout (all integers little-endian u32, all floats little-endian
f32): magic "FSTS", version, n_classes, feat_dim, text_dim; then per class
a length-prefixed UTF-8 label, a row count, the text embedding and the
feature rows. Split tags and provenance live in a JSON manifest sidecar
next to the binary (same stem, .json suffix). Floats are stored at f32 to
match upstream encoder precision; everything is f64 in memory.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .tasks import VALID_SPLITS, DatasetClass, FewShotDataset

FSTS_MAGIC = b"FSTS"
FSTS_VERSION = 1


def manifest_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_dataset(ds: FewShotDataset, path, provenance: dict | None = None) -> None:
    """Write the dataset and its manifest; byte-deterministic for equal input."""
    path = Path(path)
    chunks = [
        FSTS_MAGIC,
        struct.pack("<IIII", FSTS_VERSION, len(ds.classes), ds.feat_dim, ds.text_dim),
    ]
    for cls in ds.classes:
        if cls.n_rows < 1:
            raise DataError(f"class {cls.label!r} has no feature rows")
        label_bytes = cls.label.encode("utf-8")
        chunks.append(struct.pack("<I", len(label_bytes)))
        chunks.append(label_bytes)
        chunks.append(struct.pack("<I", cls.n_rows))
        chunks.append(np.ascontiguousarray(cls.text, dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(cls.features, dtype="<f4").tobytes())
    try:
        path.write_bytes(b"".join(chunks))
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc

    manifest = {
        "format": "FSTS",
        "version": FSTS_VERSION,
        "splits": {cls.label: cls.split for cls in ds.classes},
        "provenance": provenance or {},
    }
    manifest_path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.path = path
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.blob):
            raise DataError(f"{self.path}: unexpected end of payload")
        out = self.blob[self.offset : self.offset + n]
        self.offset += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def floats(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)


def read_dataset(path) -> FewShotDataset:
    """Read and validate an FSTS file together with its split manifest."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    r = _Reader(path.read_bytes(), path)
    if r.take(4) != FSTS_MAGIC:
        raise DataError(f"{path}: not an FSTS file (bad magic)")
    version = r.u32()
    if version != FSTS_VERSION:
        raise DataError(f"{path}: unsupported FSTS version {version}")
    n_classes = r.u32()
    feat_dim = r.u32()
    text_dim = r.u32()
    if n_classes < 1 or feat_dim < 1 or text_dim < 1:
        raise DataError(f"{path}: invalid header counts")

    mpath = manifest_path(path)
    if not mpath.exists():
        raise DataError(f"missing manifest {mpath}")
    manifest = json.loads(mpath.read_text())
    splits = manifest.get("splits", {})
    for label, split in splits.items():
        if split not in VALID_SPLITS:
            raise DataError(f"{mpath}: class {label!r} has unknown split {split!r}")

    classes = []
    for _ in range(n_classes):
        label = r.take(r.u32()).decode("utf-8")
        n_rows = r.u32()
        if n_rows < 1:
            raise DataError(f"{path}: class {label!r} has zero rows")
        text = r.floats(text_dim)
        rows = r.floats(n_rows * feat_dim).reshape(n_rows, feat_dim)
        if label not in splits:
            raise DataError(f"{mpath}: no split tag for class {label!r}")
        classes.append(
            DatasetClass(label=label, features=rows, text=text, split=splits[label])
        )
    if r.offset != len(r.blob):
        raise DataError(f"{path}: {len(r.blob) - r.offset} trailing bytes after payload")

    file_labels = {c.label for c in classes}
    orphans = sorted(set(splits) - file_labels)
    if orphans:
        raise DataError(f"{mpath}: manifest lists unknown classes: {', '.join(orphans)}")
    return FewShotDataset(classes=tuple(classes))
