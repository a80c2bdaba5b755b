"""Scoremap bundles, PNG score/label maps, and their validation.

A bundle is a directory holding ``manifest.json`` (width, height,
class_names, dtype, layout) and ``scores.bin``: raw little-endian float32
planes, class-major then row-major.  Values must lie in [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class PrgrError(Exception):
    """Error with a stable machine-parsable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class ScoreStack:
    """Per-class confidence planes in [0, 1] for one image."""

    class_names: list
    planes: np.ndarray  # (C, H, W) float32

    def __post_init__(self):
        self.planes = np.asarray(self.planes, dtype=np.float32)
        if self.planes.ndim != 3:
            raise PrgrError("stack-shape", "score stack must be (C, H, W)")
        if len(self.class_names) != self.planes.shape[0]:
            raise PrgrError("stack-names",
                            "class name count does not match plane count")

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def height(self) -> int:
        return self.planes.shape[1]


def _check_range(planes: np.ndarray) -> None:
    bad = (planes < 0.0) | (planes > 1.0) | ~np.isfinite(planes)
    if bad.any():
        plane, row, col = np.argwhere(bad)[0]
        value = planes[plane, row, col]
        raise PrgrError(
            "bundle-range",
            f"score {value!r} outside [0, 1] in plane {plane} at index "
            f"{row * planes.shape[2] + col}")


def save_bundle(stack: ScoreStack, path) -> None:
    """Write a bundle directory (manifest.json + scores.bin), lossless f32."""
    _check_range(stack.planes.astype(np.float64))
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "width": stack.width,
        "height": stack.height,
        "class_names": list(stack.class_names),
        "dtype": "f32le",
        "layout": "class-major then row-major",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                  sort_keys=True) + "\n")
    (out / "scores.bin").write_bytes(
        np.ascontiguousarray(stack.planes, dtype="<f4").tobytes())


def load_bundle(path) -> ScoreStack:
    """Read a bundle directory; bit-exact inverse of :func:`save_bundle`."""
    root = Path(path)
    mpath = root / "manifest.json"
    bpath = root / "scores.bin"
    if not mpath.is_file():
        raise PrgrError("bundle-manifest", f"missing manifest: {mpath}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise PrgrError("bundle-manifest", f"malformed manifest: {e}") from e
    for key in ("width", "height", "class_names", "dtype", "layout"):
        if key not in manifest:
            raise PrgrError("bundle-manifest", f"manifest missing {key!r}")
    if manifest["dtype"] != "f32le":
        raise PrgrError("bundle-manifest",
                        f"unsupported dtype {manifest['dtype']!r}")
    w = int(manifest["width"])
    h = int(manifest["height"])
    names = list(manifest["class_names"])
    if not bpath.is_file():
        raise PrgrError("bundle-size-mismatch", f"missing scores.bin: {bpath}")
    raw = bpath.read_bytes()
    expected = 4 * w * h * len(names)
    if len(raw) != expected:
        raise PrgrError(
            "bundle-size-mismatch",
            f"scores.bin holds {len(raw)} bytes, expected {expected}")
    planes = np.frombuffer(raw, dtype="<f4").reshape(len(names), h, w)
    _check_range(planes.astype(np.float64))
    return ScoreStack(class_names=names, planes=planes.copy())


def load_scores_png(paths) -> ScoreStack:
    """Build a stack from per-class 8-bit grayscale PNGs (score = pixel/255)."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise PrgrError("png-empty", "no score images given")
    planes = []
    names = []
    shape = None
    for p in paths:
        img = Image.open(p)
        if img.mode != "L":
            img = img.convert("L")
        arr = np.asarray(img, dtype=np.float64) / 255.0
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise PrgrError(
                "png-dimension-mismatch",
                f"{p} is {arr.shape}, expected {shape}")
        planes.append(arr.astype(np.float32))
        names.append(p.stem)
    return ScoreStack(class_names=names, planes=np.stack(planes))


def _label_palette() -> list:
    # class index == pixel value; colors spread for quick visual inspection
    palette = []
    for i in range(256):
        palette.extend([(37 * i + 11) % 256, (97 * i + 71) % 256,
                        (157 * i + 31) % 256])
    palette[:3] = [0, 0, 0]
    palette[255 * 3:255 * 3 + 3] = [255, 255, 255]
    return palette


def save_labels_png(labels: np.ndarray, path) -> None:
    """Write a paletted label PNG; pixel value is the class index, 255=ignore."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 255:
        raise PrgrError("labels-range", "labels must fit 8 bits")
    img = Image.fromarray(labels.astype(np.uint8), mode="P")
    img.putpalette(_label_palette())
    img.save(path, format="PNG")


def load_labels_png(path) -> np.ndarray:
    """Read a label PNG back to an (H, W) uint8 index map."""
    img = Image.open(path)
    if img.mode not in ("P", "L"):
        raise PrgrError("labels-mode",
                        f"label png must be paletted or grayscale, got {img.mode}")
    return np.asarray(img, dtype=np.uint8)
