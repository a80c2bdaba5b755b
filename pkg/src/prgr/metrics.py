"""Segmentation quality measures: IoU, boundary-band IoU, contour F-score,
and the variance-vs-accuracy correlation analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_dilation

IGNORE_LABEL = 255

_CHEBYSHEV = np.ones((3, 3), dtype=bool)


def _check_same_shape(pred, gt):
    if pred.shape != gt.shape:
        raise ValueError("prediction and ground truth differ in shape")


def iou(pred: np.ndarray, gt: np.ndarray, class_index: int,
        ignore_label: int = IGNORE_LABEL) -> float:
    """Intersection over union for one class; 1.0 when both sets are empty.

    Pixels whose ground-truth label equals ``ignore_label`` are excluded.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    _check_same_shape(pred, gt)
    valid = gt != ignore_label
    p = (pred == class_index) & valid
    g = (gt == class_index) & valid
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & g) / union


def _class_boundaries(labels: np.ndarray) -> np.ndarray:
    """Pixels with a 4-neighbor carrying a different label."""
    b = np.zeros(labels.shape, dtype=bool)
    b[:-1, :] |= labels[:-1, :] != labels[1:, :]
    b[1:, :] |= labels[1:, :] != labels[:-1, :]
    b[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    b[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    return b


def trimap_band(gt: np.ndarray, band_px: int) -> np.ndarray:
    """Pixels within ``band_px`` (Chebyshev) of a ground-truth class boundary."""
    if band_px < 1:
        raise ValueError("band width must be >= 1")
    boundary = _class_boundaries(np.asarray(gt))
    if not boundary.any():
        return boundary
    return binary_dilation(boundary, structure=_CHEBYSHEV, iterations=band_px)


def trimap_iou(pred: np.ndarray, gt: np.ndarray, class_index: int,
               band_px: int, ignore_label: int = IGNORE_LABEL) -> float:
    """IoU restricted to a band around the ground-truth boundaries."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    _check_same_shape(pred, gt)
    band = trimap_band(gt, band_px)
    valid = (gt != ignore_label) & band
    p = (pred == class_index) & valid
    g = (gt == class_index) & valid
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & g) / union


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Mask pixels with a 4-neighbor of opposite value; the image border
    counts as background, so edge pixels of the mask are boundary."""
    mask = np.asarray(mask, dtype=bool)
    out = np.zeros(mask.shape, dtype=bool)
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    opposite = (~padded[:-2, 1:-1] | ~padded[2:, 1:-1]
                | ~padded[1:-1, :-2] | ~padded[1:-1, 2:])
    out[mask] = opposite[mask]
    return out


def boundary_f(pred_mask: np.ndarray, gt_mask: np.ndarray,
               tolerance_px: int = 2) -> float:
    """Contour F-score with dilation matching at the given tolerance.

    Precision is the fraction of predicted boundary pixels within
    ``tolerance_px`` (Chebyshev) of the ground-truth boundary, recall the
    symmetric quantity; F = 2PR/(P+R).  Two empty boundaries score 1.0,
    exactly one empty scores 0.0.
    """
    if tolerance_px < 0:
        raise ValueError("tolerance must be >= 0")
    pred_mask = np.asarray(pred_mask, dtype=bool)
    gt_mask = np.asarray(gt_mask, dtype=bool)
    _check_same_shape(pred_mask, gt_mask)
    pb = boundary_pixels(pred_mask)
    gb = boundary_pixels(gt_mask)
    npb = np.count_nonzero(pb)
    ngb = np.count_nonzero(gb)
    if npb == 0 and ngb == 0:
        return 1.0
    if npb == 0 or ngb == 0:
        return 0.0
    if tolerance_px > 0:
        gb_zone = binary_dilation(gb, structure=_CHEBYSHEV,
                                  iterations=tolerance_px)
        pb_zone = binary_dilation(pb, structure=_CHEBYSHEV,
                                  iterations=tolerance_px)
    else:
        gb_zone = gb
        pb_zone = pb
    precision = np.count_nonzero(pb & gb_zone) / npb
    recall = np.count_nonzero(gb & pb_zone) / ngb
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class VarianceCurve:
    """Cumulative accuracy against cumulative sample fraction, by variance."""
    fractions: np.ndarray
    accuracies: np.ndarray
    r2: float
    degenerate: bool


def variance_accuracy_curve(variance: np.ndarray, correct: np.ndarray,
                            n_buckets: int = 10) -> VarianceCurve:
    """Cumulative accuracy as increasingly uncertain pixels are included.

    Pixels are sorted by variance; at each of ``n_buckets`` increasing
    variance thresholds (equal-count bucket edges, ties merged) the running
    sample fraction and running accuracy are recorded, and a straight line is
    fitted to accuracy versus fraction.  A constant variance plane (or a
    perfectly flat curve) is degenerate: R^2 reports 1.0 with the flag set.
    """
    if n_buckets < 2:
        raise ValueError("need at least two buckets")
    v = np.asarray(variance, dtype=np.float64).ravel()
    c = np.asarray(correct, dtype=np.float64).ravel()
    if v.size != c.size or v.size == 0:
        raise ValueError("variance and correctness planes must match")
    order = np.argsort(v, kind="stable")
    vs = v[order]
    cs = c[order]
    csum = np.cumsum(cs)
    n = v.size
    edges = np.unique(vs[(np.arange(1, n_buckets + 1) * n) // n_buckets - 1])
    # include every pixel tied with the threshold value
    counts = np.searchsorted(vs, edges, side="right")
    fractions = counts / n
    accuracies = csum[counts - 1] / counts
    if fractions.size < 2:
        return VarianceCurve(fractions, accuracies, 1.0, True)
    x = fractions
    y = accuracies
    xm = x.mean()
    ym = y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    sst = float(np.sum((y - ym) ** 2))
    if sst < 1e-18 or sxx < 1e-18:
        return VarianceCurve(fractions, accuracies, 1.0, True)
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    resid = y - (ym + slope * (x - xm))
    r2 = 1.0 - float(np.sum(resid ** 2)) / sst
    return VarianceCurve(fractions, accuracies, r2, False)


@dataclass
class EvalReport:
    """Aggregate evaluation of a predicted label map against ground truth."""
    per_class_iou: dict
    mean_iou: float
    trimap: list = field(default_factory=list)   # (band_px, mean_iou) pairs
    j_mean: float | None = None
    f_mean: float | None = None
    variance_r2: float | None = None
    variance_degenerate: bool | None = None
    variance_decile_error_ratio: float | None = None

    def to_dict(self) -> dict:
        return {
            "per_class_iou": {str(k): v for k, v in self.per_class_iou.items()},
            "mean_iou": self.mean_iou,
            "trimap": [{"band_px": b, "mean_iou": m} for b, m in self.trimap],
            "j_mean": self.j_mean,
            "f_mean": self.f_mean,
            "variance_r2": self.variance_r2,
            "variance_degenerate": self.variance_degenerate,
            "variance_decile_error_ratio": self.variance_decile_error_ratio,
        }


def decile_error_ratio(variance: np.ndarray, correct: np.ndarray) -> float:
    """Error rate in the top variance decile over the bottom decile.

    A zero bottom-decile error rate returns inf when the top decile has any
    errors, else 1.0.
    """
    v = np.asarray(variance, dtype=np.float64).ravel()
    c = np.asarray(correct, dtype=bool).ravel()
    n = v.size
    k = max(1, n // 10)
    order = np.argsort(v, kind="stable")
    bottom = c[order[:k]]
    top = c[order[-k:]]
    bot_err = 1.0 - bottom.mean()
    top_err = 1.0 - top.mean()
    if bot_err == 0.0:
        return float("inf") if top_err > 0 else 1.0
    return float(top_err / bot_err)


def evaluate(pred: np.ndarray, gt: np.ndarray, n_classes: int,
             trimap_bands=(), boundary_tolerance: int = 2,
             variance: np.ndarray | None = None,
             ignore_label: int = IGNORE_LABEL) -> EvalReport:
    """Full evaluation report for a predicted label map.

    ``j_mean``/``f_mean`` average region IoU and contour F over the
    non-background classes (indices >= 1).  When a per-pixel ``variance``
    plane is given, the correlation analysis uses prediction correctness
    against it.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    _check_same_shape(pred, gt)
    per_class = {c: iou(pred, gt, c, ignore_label) for c in range(n_classes)}
    mean_iou = float(np.mean(list(per_class.values())))
    trimap = [(b, float(np.mean([trimap_iou(pred, gt, c, b, ignore_label)
                                 for c in range(n_classes)])))
              for b in trimap_bands]
    fg_classes = [c for c in range(1, n_classes)]
    j_mean = f_mean = None
    if fg_classes:
        j_mean = float(np.mean([iou(pred, gt, c, ignore_label)
                                for c in fg_classes]))
        f_mean = float(np.mean([boundary_f(pred == c, gt == c,
                                           boundary_tolerance)
                                for c in fg_classes]))
    report = EvalReport(per_class_iou=per_class, mean_iou=mean_iou,
                        trimap=trimap, j_mean=j_mean, f_mean=f_mean)
    if variance is not None:
        valid = (gt != ignore_label).ravel()
        curve = variance_accuracy_curve(
            np.asarray(variance).ravel()[valid],
            (pred == gt).ravel()[valid])
        report.variance_r2 = curve.r2
        report.variance_degenerate = curve.degenerate
        report.variance_decile_error_ratio = decile_error_ratio(
            np.asarray(variance).ravel()[valid], (pred == gt).ravel()[valid])
    return report
