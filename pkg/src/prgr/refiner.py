"""Full refinement pipeline: stratified spacings, antithetic pairs, Monte
Carlo aggregation, multi-run fusion, and the sklearn-style estimator."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import _kernels
from .color import FeatureImage, build_feature_image
from .config import RefineConfig, preset_config
from .confidence import estimate_score_cdfs, seed_weight_field
from .grower import grow_arrays
from .rng import Pcg32

# spawn keys for the deterministic rng tree:
# root -> run -> class -> (gammas | iteration m) -> (seed sampling | growth)
_KEY_GAMMAS = 0
_KEY_ITER = 1  # iteration m uses key _KEY_ITER + m


@dataclass
class IterationRecord:
    """Audit record for one Monte Carlo iteration."""
    index: int
    gamma: int
    sign: int
    seeds: int


@dataclass
class RefineOutput:
    """Refined score stack, per-pixel variance, argmax labels, audit trail."""
    refined: np.ndarray    # (C, H, W) float64 in [0, 1]
    variance: np.ndarray   # (C, H, W) float64 >= 0
    labels: np.ndarray     # (H, W) int32
    manifest: list = field(default_factory=list)  # per run, per class records


def sample_gammas(cfg: RefineConfig, rng: Pcg32) -> list[int]:
    """Systematic stratified sample of seed spacings over [gamma_low, gamma_high].

    One uniform draw per stratum, rounded to the nearest integer and clamped
    to >= 2; returned ascending.
    """
    if cfg.n_gamma < 1:
        raise ValueError("n_gamma must be >= 1")
    lo, hi = float(cfg.gamma_low), float(cfg.gamma_high)
    width = (hi - lo) / cfg.n_gamma
    out = []
    for i in range(cfg.n_gamma):
        v = lo + (i + rng.uniform()) * width
        out.append(max(2, int(np.floor(v + 0.5))))
    return sorted(out)


def sample_seeds(weights: np.ndarray, gamma: int, rng: Pcg32):
    """Sample at most one seed per gamma x gamma cell of the weight field.

    Within each cell a candidate is drawn proportionally to the weights and
    accepted with probability equal to its own weight; cells with negligible
    total weight produce nothing.  Returns (pixel_indices, confidences).
    """
    if gamma < 2:
        raise ValueError("gamma must be >= 2")
    w = np.ascontiguousarray(weights, dtype=np.float64)
    height, width = w.shape
    return _kernels.sample_seeds_kernel(w.ravel(), width, height, int(gamma),
                                        rng.state_array())


def smooth3x3(plane: np.ndarray) -> np.ndarray:
    """3x3 Gaussian smoothing (binomial [1,2,1] kernel, replicated edges)."""
    p = np.pad(plane, 1, mode="edge")
    out = (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:]
           + 2.0 * p[1:-1, :-2] + 4.0 * p[1:-1, 1:-1] + 2.0 * p[1:-1, 2:]
           + p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:])
    return out / 16.0


def argmax_labels(planes: np.ndarray) -> np.ndarray:
    """Per-pixel class decision: argmax across planes, or a 0.5 threshold
    when there is a single plane (binary convention)."""
    if planes.shape[0] == 1:
        return (planes[0] >= 0.5).astype(np.int32)
    return np.argmax(planes, axis=0).astype(np.int32)


def _iteration_task(features, plane_flat, weights_flat, gamma, sign, cfg,
                    it_rng, eta):
    """One Monte Carlo iteration: seeds -> growth -> weighted cluster means."""
    seed_pix, seed_conf = _kernels.sample_seeds_kernel(
        weights_flat, features.width, features.height, gamma,
        it_rng.spawn(0).state_array())
    if seed_pix.size == 0:
        return plane_flat.copy(), 0
    labels, _visits, mu, var = grow_arrays(
        features, seed_pix, seed_conf, gamma, sign, cfg, it_rng.spawn(1))[:4]
    cbar = _kernels.cluster_score_kernel(features.feats, labels, plane_flat,
                                         mu, var, eta)
    return cbar, int(seed_pix.size)


def _refine_plane(features: FeatureImage, plane: np.ndarray,
                  weights: np.ndarray, cfg: RefineConfig, rng: Pcg32,
                  pool: ThreadPoolExecutor | None):
    """Monte Carlo refinement of one class plane with a fixed weight field.

    Returns (smoothed mean plane, variance plane, iteration records).
    """
    h, w = plane.shape
    n_s = cfg.n_iterations
    plane_flat = np.ascontiguousarray(plane, dtype=np.float64).ravel()
    weights_flat = np.ascontiguousarray(weights, dtype=np.float64).ravel()
    gammas = sample_gammas(cfg, rng.spawn(_KEY_GAMMAS))
    signs = [1, -1]

    planes = np.empty((n_s, plane_flat.size))
    records: list = [None] * n_s

    def run_one(m: int):
        gamma = gammas[m // cfg.iterations_per_gamma]
        sign = signs[m % len(signs)]
        cbar, n_seeds = _iteration_task(
            features, plane_flat, weights_flat, gamma, sign, cfg,
            rng.spawn(_KEY_ITER + m), cfg.eta)
        planes[m] = cbar
        records[m] = IterationRecord(index=m, gamma=gamma, sign=sign,
                                     seeds=n_seeds)

    if pool is None:
        for m in range(n_s):
            run_one(m)
    else:
        list(pool.map(run_one, range(n_s)))

    mean = planes.mean(axis=0)
    var = np.square(planes - mean).mean(axis=0)
    refined = np.clip(smooth3x3(mean.reshape(h, w)), 0.0, 1.0)
    return refined, var.reshape(h, w), records


def refine_class(features: FeatureImage, scores: np.ndarray,
                 labels_for_cdf: np.ndarray, class_index: int,
                 cfg: RefineConfig, rng: Pcg32,
                 pool: ThreadPoolExecutor | None = None):
    """Refine one class plane end to end.

    Estimates the score CDFs from the current prediction, derives the seed
    weight field, and runs the full set of Monte Carlo iterations.  Returns
    (refined plane, variance plane, iteration records).
    """
    if scores.shape != (features.height, features.width):
        raise ValueError("score plane does not match feature image size")
    cdfs = estimate_score_cdfs(scores, labels_for_cdf, class_index,
                               cfg.cdf_points)
    weights = seed_weight_field(scores, cdfs)
    return _refine_plane(features, scores, weights, cfg, rng, pool)


def combine_runs(estimates):
    """Inverse-variance fusion of per-run (mean, variance) plane pairs.

    Variances are floored at 1e-6 before inversion; the combined variance
    1 / sum(1/var) is returned for diagnostics.
    """
    estimates = list(estimates)
    if not estimates:
        raise ValueError("need at least one run to combine")
    num = 0.0
    den = 0.0
    for mean, var in estimates:
        iv = 1.0 / np.maximum(var, 1e-6)
        num = num + mean * iv
        den = den + iv
    return num / den, 1.0 / den


def refine_multiclass(image: np.ndarray, scores: np.ndarray,
                      cfg: RefineConfig, threads: int = 1) -> RefineOutput:
    """Refine a full per-class score stack for an RGB image.

    ``scores`` is (C, H, W) with values in [0, 1].  With ``cfg.runs > 1`` the
    runs are chained (each consumes the previous refined stack, with CDFs
    re-estimated from its argmax) and fused by inverse-variance weighting.
    The output labels are the argmax of the fused stack (0.5 threshold for a
    single-plane stack).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 3:
        raise ValueError("scores must be a (classes, H, W) stack")
    features = build_feature_image(image)
    if scores.shape[1] != features.height or scores.shape[2] != features.width:
        raise ValueError("score stack does not match image dimensions")
    if scores.min() < 0.0 or scores.max() > 1.0:
        raise ValueError("scores must lie in [0, 1]")
    n_classes = scores.shape[0]
    root = Pcg32(cfg.rng_seed)

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    manifest = []
    run_outputs = []
    try:
        current = scores
        for r in range(cfg.runs):
            run_rng = root.spawn(r)
            labels_for_cdf = argmax_labels(current)
            refined = np.empty_like(current)
            variance = np.empty_like(current)
            run_records = []
            for c in range(n_classes):
                ref, var, recs = refine_class(
                    features, current[c], labels_for_cdf, c, cfg,
                    run_rng.spawn(c), pool)
                refined[c] = ref
                variance[c] = var
                run_records.append(recs)
            run_outputs.append((refined, variance))
            manifest.append(run_records)
            current = refined
    finally:
        if pool is not None:
            pool.shutdown()

    if cfg.runs == 1:
        fused, fused_var = run_outputs[0]
    else:
        fused = np.empty_like(scores)
        fused_var = np.empty_like(scores)
        for c in range(n_classes):
            fused[c], fused_var[c] = combine_runs(
                [(ref[c], var[c]) for ref, var in run_outputs])
    return RefineOutput(refined=fused, variance=fused_var,
                        labels=argmax_labels(fused), manifest=manifest)


class RegionGrowingRefiner(BaseEstimator):
    """Scoremap refiner with the scikit-learn parameter protocol.

    The estimator is stateless (``fit`` is a no-op); ``transform`` refines a
    score stack for an image and stores the label map and variance stack as
    ``labels_`` / ``variance_`` attributes.
    """

    def __init__(self, gamma_low=2, gamma_high=16, n_gamma=10,
                 iterations_per_gamma=2, rho=0.6, lam=27.0, alpha_spatial=5.0,
                 alpha_color=0.1, kappa0=1.0, sigma0_l=1000.0, sigma0_ab=300.0,
                 eta=8, visit_cap=8, runs=1, rng_seed=0, cdf_points=256,
                 p_ih_floor=0.2, threads=1):
        self.gamma_low = gamma_low
        self.gamma_high = gamma_high
        self.n_gamma = n_gamma
        self.iterations_per_gamma = iterations_per_gamma
        self.rho = rho
        self.lam = lam
        self.alpha_spatial = alpha_spatial
        self.alpha_color = alpha_color
        self.kappa0 = kappa0
        self.sigma0_l = sigma0_l
        self.sigma0_ab = sigma0_ab
        self.eta = eta
        self.visit_cap = visit_cap
        self.runs = runs
        self.rng_seed = rng_seed
        self.cdf_points = cdf_points
        self.p_ih_floor = p_ih_floor
        self.threads = threads

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "RegionGrowingRefiner":
        cfg = preset_config(name, **overrides)
        return cls(**cfg.to_dict())

    def config(self) -> RefineConfig:
        params = self.get_params()
        params.pop("threads")
        return RefineConfig(**params)

    def fit(self, X=None, y=None):
        """No-op; the refiner is unsupervised and stateless."""
        return self

    def refine(self, image: np.ndarray, scores: np.ndarray) -> RefineOutput:
        """Full refinement; returns scores, variances, labels, manifest."""
        out = refine_multiclass(image, scores, self.config(),
                                threads=self.threads)
        self.labels_ = out.labels
        self.variance_ = out.variance
        self.manifest_ = out.manifest
        return out

    def transform(self, image: np.ndarray, scores: np.ndarray) -> np.ndarray:
        """Refined score stack for ``scores`` given ``image``."""
        return self.refine(image, scores).refined

    def fit_transform(self, image: np.ndarray, scores: np.ndarray) -> np.ndarray:
        return self.fit().transform(image, scores)
