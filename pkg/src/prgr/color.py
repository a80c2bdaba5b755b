"""sRGB to CIELab conversion and per-pixel feature construction.

The conversion is pinned bit-exactly so results are reproducible:

* linearize with the standard sRGB piecewise gamma
  (``c/12.92`` below 0.04045, else ``((c+0.055)/1.055)**2.4``),
* map to XYZ with the conventional sRGB/D65 matrix
  ``[[0.4124564, 0.3575761, 0.1804375],
     [0.2126729, 0.7151522, 0.0721750],
     [0.0193339, 0.1191920, 0.9503041]]``,
* normalize by the white point taken as the matrix row sums
  (0.9504700, 1.0000001, 1.0888300), which makes (255,255,255) map to
  exactly (100, 0, 0) and guarantees L <= 100,
* apply the CIE f(t) with the 6/29 linear toe, L = 116 f(Y/Yn) - 16,
  a = 500 (f(X/Xn) - f(Y/Yn)), b = 200 (f(Y/Yn) - f(Z/Zn)).

All arithmetic is float64; features are stored float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_M = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE = _M.sum(axis=1)
_DELTA3 = (6.0 / 29.0) ** 3
_FSCALE = 1.0 / (3.0 * (6.0 / 29.0) ** 2)


def _linearize(c):
    c = np.asarray(c, dtype=np.float64) / 255.0
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _f(t):
    return np.where(t > _DELTA3, np.cbrt(t), t * _FSCALE + 4.0 / 29.0)


def srgb_to_cielab(rgb) -> tuple[float, float, float]:
    """Convert one 8-bit sRGB triple to (L, a, b)."""
    r, g, b = rgb
    for c in (r, g, b):
        if not 0 <= c <= 255:
            raise ValueError(f"sRGB component {c!r} outside [0, 255]")
    lin = _linearize(np.array([r, g, b], dtype=np.float64))
    xyz = _M @ lin
    fx, fy, fz = _f(xyz / _WHITE)
    return (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))


def srgb_image_to_cielab(img: np.ndarray) -> np.ndarray:
    """Vectorized conversion of an (H, W, 3) uint8 image to (H, W, 3) Lab."""
    lin = _linearize(img)
    xyz = lin @ _M.T
    fxyz = _f(xyz / _WHITE)
    out = np.empty_like(fxyz)
    out[..., 0] = 116.0 * fxyz[..., 1] - 16.0
    out[..., 1] = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    out[..., 2] = 200.0 * (fxyz[..., 1] - fxyz[..., 2])
    return out


@dataclass
class FeatureImage:
    """Row-major per-pixel 5-vectors [x, y, L, a, b] for one image."""

    width: int
    height: int
    feats: np.ndarray  # (width*height, 5) float32

    def __post_init__(self):
        if self.feats.shape != (self.width * self.height, 5):
            raise ValueError("feature array shape does not match dimensions")


def build_feature_image(img: np.ndarray) -> FeatureImage:
    """Build the 5-D feature image from an (H, W, 3) uint8 sRGB array."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) RGB array")
    h, w = img.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("image has a zero dimension")
    lab = srgb_image_to_cielab(img)
    feats = np.empty((h * w, 5), dtype=np.float32)
    xs, ys = np.meshgrid(np.arange(w), np.arange(h))
    feats[:, 0] = xs.ravel()
    feats[:, 1] = ys.ravel()
    feats[:, 2:] = lab.reshape(-1, 3).astype(np.float32)
    return FeatureImage(width=w, height=h, feats=feats)
