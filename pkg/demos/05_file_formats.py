"""The two on-disk formats: FSTS datasets and FSMP mapper bundles.

Both are little-endian binary with a magic tag and a version, plus a JSON
sidecar for anything a human might want to read. Everything round-trips
bit-for-bit, which is what makes the CLI's determinism guarantees testable.
"""

import json
import struct
import tempfile
from pathlib import Path

from semstats import SynthConfig, generate_world, read_dataset, write_dataset
from semstats.io import manifest_path

ds, _ = generate_world(
    SynthConfig(n_classes=6, n_base=3, n_val=1, n_test=2, feat_dim=8, text_dim=4,
                samples_per_class=20, seed=5)
)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "world.fsts"
    write_dataset(ds, path, provenance={"tool": "demo"})

    blob = path.read_bytes()
    magic = blob[:4].decode()
    version, n_classes, feat_dim, text_dim = struct.unpack("<IIII", blob[4:20])
    print(f"{path.name}: {len(blob)} bytes")
    print(f"header: magic={magic!r} version={version} "
          f"classes={n_classes} feat_dim={feat_dim} text_dim={text_dim}")

    manifest = json.loads(manifest_path(path).read_text())
    print(f"sidecar {manifest_path(path).name}: splits="
          f"{sorted(set(manifest['splits'].values()))}, "
          f"provenance keys={sorted(manifest['provenance'])}")

    back = read_dataset(path)
    print(f"\nround trip: {len(back.classes)} classes restored")
    a, b = ds.classes[0], back.classes[0]
    drift = abs(a.features - b.features).max()
    print(f"max float drift through f32 storage: {drift:.2e}")

    # corruption is caught loudly, not silently
    path.write_bytes(blob[:-12])
    try:
        read_dataset(path)
    except Exception as exc:
        print(f"\ntruncated file -> {type(exc).__name__}: {exc}")
