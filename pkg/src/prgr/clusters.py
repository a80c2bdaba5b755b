"""Cluster statistics: conjugate-prior initialization, incremental updates,
Mahalanobis distance, and the minimum-order-statistic assignment probability.

Each cluster models its pixels as a 5-D Gaussian with diagonal covariance
over [x, y, L, a, b].  A normal-inverse-chi-squared prior per dimension gives
closed-form posterior updates as pixels join:

    kappa_n = kappa0 + n        mu_n = (kappa0 mu0 + n xbar) / kappa_n
    nu_n    = nu0 + n
    sigma2_n = [nu0 sigma2_0 + sum (x_i - xbar)^2
                + n kappa0 / (kappa0 + n) * (mu0 - xbar)^2] / nu_n

The posterior predictive (a t distribution) is approximated as normal, so
squared Mahalanobis distances to a cluster follow chi-squared with 5 degrees
of freedom, and the probability that a cluster is the nearest of ``eta``
competitors is the complement of the minimum order statistic:

    P(assign) = (1 - F(d))**eta,   F = chi-squared(5) CDF.

Sample-variance estimates are only trusted once a cluster reaches its
expected size ``ceil((gamma / p)^2)``; before that the posterior variance
stays at the prior value.  Floating-point evaluation order here matches the
compiled growth kernel exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import RefineConfig

GAMMA_1P5 = 0.8862269254527580  # Gamma(3/2)
GAMMA_2P5 = 1.3293403881791370  # Gamma(5/2), exact to double precision


def chi2_cdf5(x: float) -> float:
    """Chi-squared(5) CDF, i.e. the regularized lower incomplete gamma
    P(5/2, x/2), via the closed form for half-integer order."""
    if x < 0:
        raise ValueError("chi2_cdf5 requires x >= 0")
    if x == 0.0:
        return 0.0
    y = 0.5 * x
    sy = math.sqrt(y)
    v = math.erf(sy) - math.exp(-y) * sy * (1.0 / GAMMA_1P5 + y / GAMMA_2P5)
    if v < 0.0:
        v = 0.0
    elif v >= 1.0:
        v = 1.0 - 1e-16
    return v


def _pow_int(b: float, e: int) -> float:
    r = 1.0
    while e > 0:
        if e & 1:
            r *= b
        b *= b
        e >>= 1
    return r


def assignment_probability(d: float, eta: int) -> float:
    """Probability that a cluster at squared distance ``d`` wins the pixel,
    i.e. that ``d`` is the minimum of ``eta`` i.i.d. chi-squared(5) draws."""
    if d < 0:
        raise ValueError("distance must be >= 0")
    if eta < 1:
        raise ValueError("eta must be >= 1")
    return _pow_int(1.0 - chi2_cdf5(d), eta)


@dataclass
class ClusterStats:
    """One cluster's frozen priors, running sums, and current posterior."""

    mu0: np.ndarray          # (5,) prior means = seed feature
    sigma2_0: np.ndarray     # (5,) prior variances
    nu0: np.ndarray          # (5,) prior strength (spatial vs color alphas)
    kappa0: float
    seed_confidence: float   # clamped P(seed is high-confidence)
    size_gate: int           # expected size before sample variances are used
    antithetic_sign: int
    mu: np.ndarray = field(default=None)      # (5,) posterior means
    sigma2: np.ndarray = field(default=None)  # (5,) posterior variances
    sum: np.ndarray = field(default=None)
    sumsq: np.ndarray = field(default=None)
    size: int = 0

    def __post_init__(self):
        if self.mu is None:
            self.mu = self.mu0.copy()
        if self.sigma2 is None:
            self.sigma2 = self.sigma2_0.copy()
        if self.sum is None:
            self.sum = np.zeros(5)
        if self.sumsq is None:
            self.sumsq = np.zeros(5)

    @property
    def kappa(self) -> float:
        return self.kappa0 + self.size

    @property
    def nu(self) -> np.ndarray:
        return self.nu0 + self.size


def init_cluster(seed_feature, gamma: float, seed_conf: float, sign: int,
                 cfg: RefineConfig) -> ClusterStats:
    """Initialize a cluster's priors from its seed.

    Spatial prior variances scale with the squared seed spacing
    ``(lam * gamma)^2``; color prior variances take the antithetic factor
    ``1 +/- rho``.  Prior strengths and the size gate scale with
    ``(gamma / p)^2`` where p is the seed confidence clamped to
    ``[p_ih_floor, 1]``.
    """
    if seed_conf <= 0:
        raise ValueError("seed confidence must be positive")
    if gamma < 2:
        raise ValueError("gamma must be >= 2")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    seed_feature = np.asarray(seed_feature, dtype=np.float64)
    if seed_feature.shape != (5,):
        raise ValueError("seed feature must be a 5-vector")
    p = min(max(seed_conf, cfg.p_ih_floor), 1.0)
    r = gamma / p
    sxy = (cfg.lam * gamma) ** 2
    sigma2_0 = np.array([
        sxy, sxy,
        cfg.sigma0_l * (1.0 + sign * cfg.rho),
        cfg.sigma0_ab * (1.0 + sign * cfg.rho),
        cfg.sigma0_ab * (1.0 + sign * cfg.rho),
    ])
    v_sp = cfg.alpha_spatial * (r * r)
    v_co = cfg.alpha_color * (r * r)
    nu0 = np.array([v_sp, v_sp, v_co, v_co, v_co])
    return ClusterStats(
        mu0=seed_feature.copy(),
        sigma2_0=sigma2_0,
        nu0=nu0,
        kappa0=cfg.kappa0,
        seed_confidence=p,
        size_gate=int(math.ceil(r * r)),
        antithetic_sign=sign,
    )


def update_cluster(cluster: ClusterStats, z) -> ClusterStats:
    """Fold one sample into the posterior (in place; returns the cluster).

    Means update every time; posterior variances switch from the prior to
    the full formula only once ``size`` reaches ``size_gate``, using the
    accumulated sums of all samples so far.
    """
    z = np.asarray(z, dtype=np.float64)
    cluster.size += 1
    n = float(cluster.size)
    inv_n = 1.0 / n
    inv_kap = 1.0 / (cluster.kappa0 + n)
    w_dm = n * cluster.kappa0 * inv_kap
    dogate = cluster.size >= cluster.size_gate
    for d in range(5):
        zd = float(z[d])
        a1 = cluster.sum[d] + zd
        cluster.sum[d] = a1
        a2 = cluster.sumsq[d] + zd * zd
        cluster.sumsq[d] = a2
        xb = a1 * inv_n
        cluster.mu[d] = (cluster.kappa0 * cluster.mu0[d] + n * xb) * inv_kap
        if dogate:
            ss = a2 - n * (xb * xb)
            if ss < 0.0:
                ss = 0.0
            dm = cluster.mu0[d] - xb
            cluster.sigma2[d] = (cluster.nu0[d] * cluster.sigma2_0[d] + ss
                                 + w_dm * (dm * dm)) * (1.0 / (cluster.nu0[d] + n))
    return cluster


def mahalanobis(cluster: ClusterStats, z) -> float:
    """Squared Mahalanobis distance to the cluster's posterior (diagonal)."""
    z = np.asarray(z, dtype=np.float64)
    d = 0.0
    for i in range(5):
        df = float(z[i]) - cluster.mu[i]
        d += df * df * (1.0 / cluster.sigma2[i])
    return d
