"""Synthetic segmentation cases: rendered shapes with controllable score
corruption, standing in for coarse network predictions of varied quality."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion, gaussian_filter

from .bundleio import ScoreStack

# strongly separated colors in CIELab (pairwise Mahalanobis distance under
# the widest color priors > 12); index 0 is the background
PALETTE = [
    (34, 34, 170),    # deep blue
    (0, 255, 0),      # green
    (255, 85, 0),     # orange
    (136, 255, 255),  # pale cyan
    (51, 0, 17),      # near-black maroon
]


@dataclass
class SynthSpec:
    """Geometry and corruption parameters for generated cases."""

    width: int = 256
    height: int = 256
    n_shapes: int = 1
    min_radius_frac: float = 0.15
    max_radius_frac: float = 0.30
    texture_noise: int = 3      # +/- RGB levels on the rendered image
    dilate_radius: int = 0
    erode_radius: int = 0
    blur_sigma: float = 0.0
    noise_amp: float = 0.0
    fp_blob: bool = False       # carve a hole in the shape, keep it in scores
    blob_radius_frac: float = 0.45

    def __post_init__(self):
        if self.n_shapes < 1 or self.n_shapes > len(PALETTE) - 1:
            raise ValueError("n_shapes out of range")
        if self.dilate_radius < 0 or self.erode_radius < 0:
            raise ValueError("morphology radii must be >= 0")
        if self.dilate_radius and self.erode_radius:
            raise ValueError("choose dilation or erosion, not both")
        if self.blur_sigma < 0 or self.noise_amp < 0:
            raise ValueError("corruption parameters must be >= 0")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        return cls(**json.loads(text))


@dataclass
class SynthCase:
    """One generated case: image, exact labels, corrupted score stack."""

    image: np.ndarray        # (H, W, 3) uint8
    gt: np.ndarray           # (H, W) uint8 class indices, 0 = background
    coarse: ScoreStack
    descriptor: dict = field(default_factory=dict)


def _disk(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return xx * xx + yy * yy <= r * r


def _render_shape(kind: str, cx, cy, rx, ry, rng, width, height) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    if kind == "rect":
        return (np.abs(xx - cx) <= rx) & (np.abs(yy - cy) <= ry)
    if kind == "ellipse":
        return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    # convex polygon: jittered regular angles (never degenerate), half-plane fill
    n_vert = int(rng.integers(3, 8))
    angles = 2.0 * np.pi * (np.arange(n_vert)
                            + rng.uniform(0.15, 0.85, n_vert)) / n_vert
    radii = rng.uniform(0.7, 1.0, n_vert)
    vx = cx + rx * radii * np.cos(angles)
    vy = cy + ry * radii * np.sin(angles)
    inside = np.ones((height, width), dtype=bool)
    for i in range(n_vert):
        x0, y0 = vx[i], vy[i]
        x1, y1 = vx[(i + 1) % n_vert], vy[(i + 1) % n_vert]
        inside &= (xx - x0) * (y1 - y0) - (yy - y0) * (x1 - x0) <= 0.0
    return inside


def _corrupt(indicator: np.ndarray, spec: SynthSpec,
             rng: np.random.Generator) -> np.ndarray:
    mask = indicator.astype(bool)
    if spec.dilate_radius > 0:
        mask = binary_dilation(mask, structure=_disk(spec.dilate_radius))
    elif spec.erode_radius > 0:
        mask = binary_erosion(mask, structure=_disk(spec.erode_radius))
    plane = mask.astype(np.float64)
    if spec.blur_sigma > 0:
        plane = gaussian_filter(plane, sigma=spec.blur_sigma, mode="nearest")
    if spec.noise_amp > 0:
        plane = plane + rng.uniform(-spec.noise_amp, spec.noise_amp,
                                    plane.shape)
    return np.clip(plane, 0.0, 1.0)


def synth_case(spec: SynthSpec, seed: int) -> SynthCase:
    """Generate one case deterministically from ``seed``.

    The ground truth is the exact rasterization; each class score plane is
    the (optionally hole-filled) indicator run through dilation/erosion,
    Gaussian blur, and clipped additive noise.  Single-shape cases produce a
    one-plane stack (binary convention); multi-shape cases prepend a
    background plane.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    w, h = spec.width, spec.height
    image = np.empty((h, w, 3), dtype=np.float64)
    image[:] = PALETTE[0]
    gt = np.zeros((h, w), dtype=np.uint8)
    kinds = ["rect", "ellipse", "polygon"]
    shapes = []
    fill_masks = []
    for s in range(spec.n_shapes):
        kind = kinds[int(rng.integers(0, len(kinds)))]
        extra = max(2.0, min(6.0, 0.04 * min(w, h)))
        rx = min(rng.uniform(spec.min_radius_frac, spec.max_radius_frac) * w,
                 0.5 * w - extra - 1.0)
        ry = min(rng.uniform(spec.min_radius_frac, spec.max_radius_frac) * h,
                 0.5 * h - extra - 1.0)
        if rx < 1.0 or ry < 1.0:
            raise ValueError("canvas too small for the requested shapes")
        margin_x = rx + extra
        margin_y = ry + extra
        cx = rng.uniform(margin_x, w - margin_x)
        cy = rng.uniform(margin_y, h - margin_y)
        mask = _render_shape(kind, cx, cy, rx, ry, rng, w, h)
        if mask.sum() == 0:
            raise ValueError("degenerate shape with zero area")
        filled = mask.copy()
        hole = None
        if spec.fp_blob:
            # keep a ring of at least 4 px so the hole stays fully enclosed
            hole_r = spec.blob_radius_frac * min(rx, ry)
            yy, xx = np.mgrid[0:h, 0:w]
            core = binary_erosion(mask, structure=_disk(4))
            hole = ((xx - cx) ** 2 + (yy - cy) ** 2 <= hole_r ** 2) & core
            if hole.sum() == 0:
                raise ValueError("shape too thin to host an enclosed blob")
            mask = mask & ~hole
        color = PALETTE[1 + s]
        image[mask] = color
        gt[mask] = 1 + s
        if hole is not None:
            image[hole] = PALETTE[0]
            gt[hole] = 0
        fill_masks.append(filled)
        shapes.append({"kind": kind, "cx": cx, "cy": cy, "rx": rx, "ry": ry,
                       "has_blob": bool(spec.fp_blob)})
    if spec.texture_noise > 0:
        image = image + rng.integers(-spec.texture_noise,
                                     spec.texture_noise + 1, image.shape)
    image = np.clip(image, 0, 255).astype(np.uint8)

    fg_planes = [_corrupt(m, spec, rng) for m in fill_masks]
    if spec.n_shapes == 1:
        names = ["shape"]
        planes = np.stack(fg_planes)
    else:
        names = ["background"] + [f"shape{i + 1}" for i in range(spec.n_shapes)]
        bg = np.clip(1.0 - np.sum(fg_planes, axis=0), 0.0, 1.0)
        planes = np.stack([bg] + fg_planes)
    coarse = ScoreStack(class_names=names, planes=planes.astype(np.float32))
    descriptor = {
        "seed": int(seed),
        "spec": asdict(spec),
        "shapes": shapes,
    }
    return SynthCase(image=image, gt=gt, coarse=coarse, descriptor=descriptor)
