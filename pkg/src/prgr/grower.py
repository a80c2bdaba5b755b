"""Priority-queue region growing of seeds into clusters.

Tentative assignments (pixel, cluster, probability) are processed best-first.
A popped element is skipped if its pixel is already assigned or has used all
its visits; otherwise a uniform draw against the element's probability
decides assignment.  On assignment the cluster posterior is updated and all
unassigned 8-neighbors are pushed with freshly computed probabilities; on
failure the element goes to a recycling queue that is re-scored against
current statistics and re-pushed whenever the main queue drains.  Pixels
never assigned end as orphans.

Ties in priority break by push order (FIFO), so the whole process is a
deterministic function of (features, seeds, gamma, sign, config, rng seed).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .clusters import ClusterStats
from .color import FeatureImage
from .config import RefineConfig
from .rng import Pcg32

ORPHAN = -1

MAX_PIXELS = 1 << 27   # payload packing limit
MAX_CLUSTERS = 1 << 26


def grow_arrays(features: FeatureImage, seed_pix: np.ndarray,
                seed_conf: np.ndarray, gamma: int, sign: int,
                cfg: RefineConfig, rng: Pcg32):
    """Run the growth kernel; returns raw arrays (flat labels first).

    Returns ``(labels, visits, mu, sigma2, sizes, sums, sumsqs, mu0,
    sigma2_0, nu0, gate, conf_used)`` where per-cluster arrays are (K, 5)
    or (K,).
    """
    n = features.width * features.height
    if n >= MAX_PIXELS:
        raise ValueError("image too large for the growth kernel")
    seed_pix = np.asarray(seed_pix, dtype=np.int64)
    seed_conf = np.asarray(seed_conf, dtype=np.float64)
    if seed_pix.size == 0:
        raise ValueError("at least one seed is required")
    if seed_pix.size >= MAX_CLUSTERS:
        raise ValueError("too many seeds for the growth kernel")
    if np.unique(seed_pix).size != seed_pix.size:
        raise ValueError("seed pixel indices must be distinct")
    if seed_pix.min() < 0 or seed_pix.max() >= n:
        raise ValueError("seed pixel index out of range")
    if np.any(seed_conf <= 0.0):
        raise ValueError("seed confidence must be positive")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return _kernels.grow_kernel(
        features.feats, features.width, features.height,
        seed_pix, seed_conf, float(gamma), float(sign),
        cfg.lam, cfg.rho, cfg.alpha_spatial, cfg.alpha_color, cfg.kappa0,
        cfg.sigma0_l, cfg.sigma0_ab, cfg.p_ih_floor,
        cfg.eta, cfg.visit_cap, rng.state_array(),
    )


def grow(features: FeatureImage, seeds, gamma: int, sign: int,
         cfg: RefineConfig, rng: Pcg32):
    """Grow ``seeds`` (pairs of pixel index and confidence) into clusters.

    Returns ``(labels, clusters)`` where ``labels`` is an (H, W) int32 map of
    cluster indices with ORPHAN (-1) for unassigned pixels, and ``clusters``
    is a list of :class:`ClusterStats` with final posteriors.
    """
    seeds = list(seeds)
    seed_pix = np.array([s[0] for s in seeds], dtype=np.int64)
    seed_conf = np.array([s[1] for s in seeds], dtype=np.float64)
    (labels, _visits, mu, var, nk, acc, acc2,
     mu0, sig0, v0, gate, conf_used) = grow_arrays(
        features, seed_pix, seed_conf, gamma, sign, cfg, rng)
    clusters = []
    for k in range(seed_pix.size):
        clusters.append(ClusterStats(
            mu0=mu0[k].copy(), sigma2_0=sig0[k].copy(), nu0=v0[k].copy(),
            kappa0=cfg.kappa0, seed_confidence=float(conf_used[k]),
            size_gate=int(gate[k]), antithetic_sign=sign,
            mu=mu[k].copy(), sigma2=var[k].copy(),
            sum=acc[k].copy(), sumsq=acc2[k].copy(), size=int(nk[k]),
        ))
    return labels.reshape(features.height, features.width), clusters
