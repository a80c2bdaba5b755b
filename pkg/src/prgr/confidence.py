"""Non-parametric score-threshold distributions and seed-sampling weights.

For a class plane, pixels predicted as that class are "foreground" and all
others "background".  The cumulative distributions of their scores stand in
for the unknown high-confidence thresholds: a pixel with score c is likely
high-confidence if c falls above the background scores or below none of the
foreground ones, which combines into

    P(high confidence at c) = 1 - Fb(c) + Fb(c) * Ff(c).

Both CDFs are Gaussian-kernel estimates evaluated on a fixed grid over
[0, 1] (Silverman bandwidth, floored at one grid step) and renormalized so
the final grid value is exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr


@dataclass
class CdfPair:
    """Background/foreground score CDFs on a shared uniform grid."""

    eval_points: np.ndarray  # (n,) uniform grid spanning [0, 1]
    fb: np.ndarray           # nondecreasing, fb[-1] == 1
    ff: np.ndarray

    def lookup_b(self, c):
        return np.interp(c, self.eval_points, self.fb)

    def lookup_f(self, c):
        return np.interp(c, self.eval_points, self.ff)


def _kde_cdf(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Gaussian-kernel CDF of ``values`` on ``grid``, renormalized to end at 1."""
    n_grid = grid.shape[0]
    m = values.shape[0]
    # histogram the samples onto the evaluation grid; 8-bit-scale inputs lose
    # nothing and the kernel sum becomes a small dense matrix product
    idx = np.clip(np.rint(values * (n_grid - 1)).astype(np.int64), 0, n_grid - 1)
    counts = np.bincount(idx, minlength=n_grid).astype(np.float64)
    std = float(np.std(values))
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    h = 0.9 * spread * m ** (-0.2) if spread > 0 else 0.0
    h = max(h, 1.0 / n_grid)
    z = (grid[:, None] - grid[None, :]) / h
    raw = ndtr(z) @ counts
    return raw / raw[-1]


def estimate_score_cdfs(scores: np.ndarray, argmax_labels: np.ndarray,
                        class_index: int, cdf_points: int = 256) -> CdfPair:
    """Estimate the background/foreground score CDFs for one class.

    Foreground pixels are those whose predicted label equals ``class_index``;
    an empty side degenerates to a unit step (at 1.0 for foreground, at 0.0
    for background) so the probability formula stays well defined.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(argmax_labels).ravel()
    if scores.size == 0:
        raise ValueError("scores plane is empty")
    if scores.size != labels.size:
        raise ValueError("scores and labels disagree in size")
    grid = np.linspace(0.0, 1.0, cdf_points)
    fg = labels == class_index
    fg_scores = scores[fg]
    bg_scores = scores[~fg]
    if fg_scores.size == 0:
        ff = np.zeros(cdf_points)
        ff[-1] = 1.0
    else:
        ff = _kde_cdf(fg_scores, grid)
    if bg_scores.size == 0:
        fb = np.ones(cdf_points)
    else:
        fb = _kde_cdf(bg_scores, grid)
    return CdfPair(eval_points=grid, fb=fb, ff=ff)


def high_confidence_probability(c: float, cdfs: CdfPair) -> float:
    """P(high confidence) at score c: 1 - Fb(c) + Fb(c) Ff(c)."""
    fb = cdfs.lookup_b(c)
    ff = cdfs.lookup_f(c)
    return 1.0 - fb + fb * ff


def seed_weight_field(scores: np.ndarray, cdfs: CdfPair) -> np.ndarray:
    """Per-pixel high-confidence probability; same shape as ``scores``."""
    c = np.asarray(scores, dtype=np.float64)
    fb = np.interp(c, cdfs.eval_points, cdfs.fb)
    ff = np.interp(c, cdfs.eval_points, cdfs.ff)
    return 1.0 - fb + fb * ff
