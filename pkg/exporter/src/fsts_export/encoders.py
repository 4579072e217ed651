"""Image/text encoders behind one tiny interface.

Two implementations:

* ``clip``: a pretrained vision-language model via ``transformers``
  (optional extra). This is what real exports should use.
* ``hash``: a deterministic random-projection encoder that needs no
  weights or network. Useless semantically, but structurally identical
  output (unit-norm f32 embeddings), which is exactly what the format
  tests and CI need.

All encoders L2-normalize their outputs.
"""

from __future__ import annotations

import hashlib
import unicodedata
from pathlib import Path

import numpy as np
from PIL import Image


class EncoderError(RuntimeError):
    pass


def _l2_normalize(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise EncoderError("zero-norm embedding")
    return v / norm


class HashEncoder:
    """Deterministic offline encoder: fixed random projections, no model.

    Images are resized to a small grid and projected with a matrix drawn
    from a fixed seed; text is hashed into a seed that generates its
    embedding. Identical inputs give identical outputs on any machine.
    """

    name = "hash"
    _PROJECTION_SEED = 0x5EED_F575

    def __init__(self, feat_dim: int = 64, text_dim: int = 64, grid: int = 16):
        self.feat_dim = feat_dim
        self.text_dim = text_dim
        self.grid = grid
        rng = np.random.default_rng(self._PROJECTION_SEED)
        self._projection = rng.normal(size=(grid * grid * 3, feat_dim)) / np.sqrt(grid * grid * 3)

    def encode_image(self, path: Path) -> np.ndarray:
        with Image.open(path) as img:
            small = img.convert("RGB").resize((self.grid, self.grid), Image.BILINEAR)
        pixels = np.asarray(small, dtype=np.float64).reshape(-1) / 255.0
        return _l2_normalize(pixels @ self._projection)

    def encode_text(self, text: str) -> np.ndarray:
        digest = hashlib.blake2b(
            unicodedata.normalize("NFC", text).encode("utf-8"), digest_size=8
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        return _l2_normalize(rng.normal(size=self.text_dim))


class ClipEncoder:
    """Pretrained CLIP via transformers; import and weights load lazily."""

    name = "clip"

    def __init__(self, model_name: str = "openai/clip-vit-base-patch32"):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:  # pragma: no cover - depends on extras
            raise EncoderError(
                "the clip encoder needs the [clip] extra (torch + transformers)"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(model_name)
        except Exception as exc:  # pragma: no cover - depends on cached weights
            raise EncoderError(
                f"could not load CLIP weights {model_name!r}; pass --encoder hash "
                f"for an offline structural export ({exc})"
            ) from exc
        self._processor = CLIPProcessor.from_pretrained(model_name)
        self._model.eval()
        self._torch = torch
        self.model_name = model_name
        self.feat_dim = self._model.config.projection_dim
        self.text_dim = self._model.config.projection_dim

    def encode_image(self, path: Path) -> np.ndarray:
        with Image.open(path) as img:
            inputs = self._processor(images=img.convert("RGB"), return_tensors="pt")
        with self._torch.no_grad():
            feats = self._model.get_image_features(**inputs)[0].numpy().astype(np.float64)
        return _l2_normalize(feats)

    def encode_text(self, text: str) -> np.ndarray:
        inputs = self._processor(text=[text], return_tensors="pt", padding=True)
        with self._torch.no_grad():
            feats = self._model.get_text_features(**inputs)[0].numpy().astype(np.float64)
        return _l2_normalize(feats)


def make_encoder(name: str, **kwargs):
    if name == "hash":
        return HashEncoder(**kwargs)
    if name == "clip":
        return ClipEncoder(**kwargs)
    raise EncoderError(f"unknown encoder {name!r}; choose from hash, clip")
