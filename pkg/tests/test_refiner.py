import numpy as np
import pytest
from sklearn.base import clone

from prgr.color import build_feature_image
from prgr.clusters import assignment_probability, init_cluster, mahalanobis
from prgr.config import RefineConfig
from prgr.refiner import (RegionGrowingRefiner, argmax_labels, combine_runs,
                          refine_multiclass, sample_gammas, sample_seeds,
                          smooth3x3, _refine_plane)
from prgr.rng import Pcg32
from prgr.synth import SynthSpec, synth_case

from reference import reference_sample_seeds


# ------------------------------------------------------------ gamma strata

def test_sample_gammas_strata_bounds():
    cfg = RefineConfig(gamma_low=2, gamma_high=16, n_gamma=10)
    for s in range(50):
        rng = Pcg32(s)
        # regenerate the draws to know each stratum position
        probe = Pcg32(s)
        raw = [2 + (i + probe.uniform()) * 1.4 for i in range(10)]
        got = sample_gammas(cfg, rng)
        assert got == sorted(max(2, int(np.floor(v + 0.5))) for v in raw)
        assert all(2 <= g <= 16 for g in got)
        assert len(got) == 10
        assert got == sorted(got)


def test_sample_gammas_single_stratum():
    cfg = RefineConfig(gamma_low=2, gamma_high=12, n_gamma=1)
    vals = {sample_gammas(cfg, Pcg32(s))[0] for s in range(200)}
    assert min(vals) >= 2 and max(vals) <= 12
    assert len(vals) > 5  # draws actually spread over the range


def test_sample_gammas_degenerate_range():
    cfg = RefineConfig(gamma_low=7, gamma_high=7, n_gamma=4)
    assert sample_gammas(cfg, Pcg32(1)) == [7, 7, 7, 7]


# ------------------------------------------------------------ seed sampling

def test_sample_seeds_uniform_weights_one_per_cell():
    w = np.ones((8, 8))
    for s in range(30):
        pix, conf = sample_seeds(w, 4, Pcg32(s))
        assert pix.size == 4
        cells = {(p // 8 // 4, p % 8 // 4) for p in pix}
        assert len(cells) == 4
        assert np.all(conf == 1.0)


def test_sample_seeds_uniform_within_cell():
    w = np.ones((4, 4))
    counts = np.zeros(16)
    trials = 4000
    for s in range(trials):
        pix, _ = sample_seeds(w, 4, Pcg32(s))  # one cell of 16 pixels
        counts[pix[0]] += 1
    # each pixel should be chosen ~1/16 of the time
    assert counts.sum() == trials
    assert np.all(np.abs(counts / trials - 1 / 16) < 0.02)


def test_sample_seeds_zero_weights():
    pix, conf = sample_seeds(np.zeros((8, 8)), 4, Pcg32(0))
    assert pix.size == 0


def test_sample_seeds_single_hot_pixel():
    w = np.zeros((8, 8))
    w[2, 3] = 1.0
    for s in range(20):
        pix, conf = sample_seeds(w, 8, Pcg32(s))
        assert list(pix) == [2 * 8 + 3]
        assert conf[0] == 1.0


def test_sample_seeds_acceptance_rate():
    w = np.full((32, 32), 0.35)
    hits = 0
    trials = 300
    for s in range(trials):
        pix, _ = sample_seeds(w, 32, Pcg32(s))  # single cell
        hits += pix.size
    assert abs(hits / trials - 0.35) < 0.08


def test_sample_seeds_kernel_matches_reference():
    rng = np.random.default_rng(20)
    for trial in range(15):
        h = int(rng.integers(3, 20))
        w = int(rng.integers(3, 20))
        gamma = int(rng.integers(2, 7))
        field = rng.uniform(0, 1, (h, w))
        field[rng.uniform(0, 1, (h, w)) < 0.3] = 0.0
        seed = int(rng.integers(0, 2 ** 60))
        kp, kc = sample_seeds(field, gamma, Pcg32(seed))
        rp, rc = reference_sample_seeds(field, gamma, Pcg32(seed))
        assert np.array_equal(kp, rp)
        assert np.array_equal(kc, rc)


# ------------------------------------------------------------- aggregation

def test_two_pixel_cluster_weighted_mean():
    from prgr._kernels import cluster_score_kernel
    # two member pixels mirrored about the posterior mean -> equal weights
    feats = np.zeros((2, 5), dtype=np.float32)
    feats[0, 0] = -1.0
    feats[1, 0] = 1.0
    labels = np.zeros(2, dtype=np.int32)
    mu = np.zeros((1, 5))
    var = np.ones((1, 5))
    scores = np.array([0.2, 1.0])
    out = cluster_score_kernel(feats, labels, scores, mu, var, 8)
    assert out == pytest.approx([0.6, 0.6])
    # and the weights used agree with the module-level operations
    c = init_cluster(np.zeros(5), 2, 1.0, 1, RefineConfig())
    c.mu = mu[0]
    c.sigma2 = var[0]
    w0 = assignment_probability(mahalanobis(c, feats[0].astype(float)), 8)
    w1 = assignment_probability(mahalanobis(c, feats[1].astype(float)), 8)
    assert w0 == w1


def test_orphans_keep_input_scores():
    from prgr._kernels import cluster_score_kernel
    feats = np.zeros((3, 5), dtype=np.float32)
    labels = np.array([0, -1, 0], dtype=np.int32)
    mu = np.zeros((1, 5))
    var = np.ones((1, 5))
    scores = np.array([1.0, 0.123, 0.5])
    out = cluster_score_kernel(feats, labels, scores, mu, var, 8)
    assert out[1] == 0.123


# ---------------------------------------------------------------- smoothing

def test_smooth3x3_constant_identity_and_mass():
    plane = np.full((9, 7), 0.37)
    assert np.allclose(smooth3x3(plane), 0.37)
    rng = np.random.default_rng(21)
    p = rng.uniform(0, 1, (16, 16))
    s = smooth3x3(p)
    assert s.min() >= 0 and s.max() <= 1
    # interior response equals the explicit binomial stencil
    r, c = 7, 9
    kernel = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]]) / 16
    assert s[r, c] == pytest.approx(np.sum(p[r-1:r+2, c-1:c+2] * kernel))


# ------------------------------------------------------------ combine_runs

def test_combine_runs_identity_and_mean():
    a = np.array([[0.8]])
    va = np.array([[0.01]])
    m, v = combine_runs([(a, va)])
    assert np.allclose(m, a) and np.allclose(v, va)
    b = np.array([[0.4]])
    m, _ = combine_runs([(a, va), (b, va)])
    assert m == pytest.approx(0.6)


def test_combine_runs_hand_value():
    m, v = combine_runs([(np.array([0.8]), np.array([0.01])),
                         (np.array([0.4]), np.array([0.04]))])
    assert m[0] == pytest.approx(0.72)
    assert v[0] == pytest.approx(1.0 / 125.0)


def test_combine_runs_empty_rejected():
    with pytest.raises(ValueError):
        combine_runs([])


def test_combine_runs_zero_variance_floor():
    m, v = combine_runs([(np.array([1.0]), np.array([0.0])),
                         (np.array([0.0]), np.array([1.0]))])
    assert 0.99 < m[0] <= 1.0  # certain estimate dominates but stays finite


# ----------------------------------------------------------- plane refine

def _flat_case(value):
    img = np.full((24, 24, 3), 128, dtype=np.uint8)
    plane = np.full((24, 24), value)
    return img, plane


def test_constant_plane_refines_to_itself():
    cfg = RefineConfig(gamma_high=8, n_gamma=3, rng_seed=3)
    for value in (1.0, 0.0):
        img, plane = _flat_case(value)
        out = refine_multiclass(img, plane[None], cfg)
        assert np.allclose(out.refined[0], value)
        assert np.allclose(out.variance[0], 0.0)


def test_zero_weight_field_degrades_to_smoothed_input():
    cfg = RefineConfig(gamma_high=8, n_gamma=2, rng_seed=5)
    features = build_feature_image(np.full((16, 16, 3), 80, dtype=np.uint8))
    rng = np.random.default_rng(22)
    plane = rng.uniform(0, 1, (16, 16))
    refined, var, records = _refine_plane(features, plane,
                                          np.zeros((16, 16)), cfg,
                                          Pcg32(9), None)
    assert np.allclose(refined, np.clip(smooth3x3(plane), 0, 1))
    assert np.allclose(var, 0.0)
    assert all(r.seeds == 0 for r in records)
    assert len(records) == cfg.n_iterations


def test_iteration_accounting_and_antithetic_pairs():
    cfg = RefineConfig(gamma_high=12, n_gamma=5, rng_seed=1)
    features = build_feature_image(np.full((20, 20, 3), 60, dtype=np.uint8))
    plane = np.full((20, 20), 1.0)
    _, _, records = _refine_plane(features, plane, np.ones((20, 20)), cfg,
                                  Pcg32(4), None)
    assert len(records) == 10
    for i in range(0, 10, 2):
        assert records[i].gamma == records[i + 1].gamma
        assert records[i].sign == 1
        assert records[i + 1].sign == -1
    gammas = [records[i].gamma for i in range(0, 10, 2)]
    assert gammas == sorted(gammas)


# ---------------------------------------------------------- full pipeline

def test_refined_scores_bounded_on_random_input():
    rng = np.random.default_rng(23)
    img = rng.integers(0, 256, (20, 20, 3), dtype=np.uint8)
    stack = rng.uniform(0, 1, (2, 20, 20))
    cfg = RefineConfig(gamma_high=6, n_gamma=2, rng_seed=8)
    out = refine_multiclass(img, stack, cfg)
    assert out.refined.min() >= 0.0 and out.refined.max() <= 1.0
    assert out.variance.min() >= 0.0
    assert out.labels.shape == (20, 20)


def test_complementary_planes_keep_labels_on_flat_regions():
    case = synth_case(SynthSpec(width=40, height=40), seed=3)
    fg = case.coarse.planes[0].astype(np.float64)
    stack = np.stack([1.0 - fg, fg])
    cfg = RefineConfig(gamma_high=8, n_gamma=3, rng_seed=2)
    out = refine_multiclass(case.image, stack, cfg)
    assert np.mean(out.labels == case.gt) > 0.98


def test_determinism_same_seed_and_thread_invariance():
    case = synth_case(SynthSpec(width=32, height=32, dilate_radius=2,
                                blur_sigma=1.0, noise_amp=0.05), seed=5)
    cfg = RefineConfig(gamma_high=8, n_gamma=3, rng_seed=77)
    a = refine_multiclass(case.image, case.coarse.planes, cfg, threads=1)
    b = refine_multiclass(case.image, case.coarse.planes, cfg, threads=1)
    c = refine_multiclass(case.image, case.coarse.planes, cfg, threads=4)
    assert np.array_equal(a.refined, b.refined)
    assert np.array_equal(a.refined, c.refined)
    assert np.array_equal(a.variance, c.variance)
    assert np.array_equal(a.labels, c.labels)
    d = refine_multiclass(case.image, case.coarse.planes,
                          cfg.with_overrides(rng_seed=78))
    assert not np.array_equal(a.refined, d.refined)


def test_double_refinement_runs_and_fuses():
    case = synth_case(SynthSpec(width=32, height=32, dilate_radius=3,
                                blur_sigma=1.0, noise_amp=0.05), seed=6)
    cfg = RefineConfig(gamma_high=8, n_gamma=2, runs=2, rng_seed=10)
    out = refine_multiclass(case.image, case.coarse.planes, cfg)
    assert len(out.manifest) == 2
    assert out.refined.min() >= 0.0 and out.refined.max() <= 1.0
    single = refine_multiclass(case.image, case.coarse.planes,
                               cfg.with_overrides(runs=1))
    assert not np.array_equal(out.refined, single.refined)


def test_confident_regions_not_corrupted():
    # hard color edge aligned with the score edge: refinement must leave
    # high-confidence pixels essentially untouched
    from prgr.confidence import estimate_score_cdfs, seed_weight_field
    img = np.zeros((48, 48, 3), dtype=np.uint8)
    img[:, :24] = (34, 34, 170)
    img[:, 24:] = (0, 255, 0)
    plane = np.zeros((48, 48))
    plane[:, 24:] = 1.0
    cfg = RefineConfig(gamma_high=12, rng_seed=6)
    out = refine_multiclass(img, plane[None], cfg)
    cdfs = estimate_score_cdfs(plane, argmax_labels(plane[None]), 1)
    w = seed_weight_field(plane, cdfs)
    confident = w > 0.99
    assert confident.any()
    change = np.abs(out.refined[0] - plane)[confident].mean()
    assert change < 0.05


def test_single_plane_binary_labels():
    plane = np.full((10, 10), 0.9)
    plane[:5] = 0.1
    labels = argmax_labels(plane[None])
    assert set(np.unique(labels)) == {0, 1}
    assert labels[0, 0] == 0 and labels[9, 9] == 1


def test_dimension_mismatch_rejected():
    img = np.zeros((10, 10, 3), dtype=np.uint8)
    with pytest.raises(ValueError):
        refine_multiclass(img, np.zeros((1, 9, 10)), RefineConfig())
    with pytest.raises(ValueError):
        refine_multiclass(img, np.full((1, 10, 10), 1.5), RefineConfig())


# ---------------------------------------------------------------- estimator

def test_estimator_params_roundtrip_and_clone():
    est = RegionGrowingRefiner(gamma_high=24, runs=2, rng_seed=9, threads=2)
    params = est.get_params()
    assert params["gamma_high"] == 24 and params["runs"] == 2
    est2 = clone(est)
    assert est2.get_params() == params
    est2.set_params(gamma_high=48)
    assert est2.get_params()["gamma_high"] == 48
    cfg = est.config()
    assert isinstance(cfg, RefineConfig) and cfg.gamma_high == 24


def test_estimator_transform_matches_function():
    case = synth_case(SynthSpec(width=24, height=24, dilate_radius=2),
                      seed=8)
    est = RegionGrowingRefiner(gamma_high=6, n_gamma=2, rng_seed=4)
    refined = est.fit().transform(case.image, case.coarse.planes)
    direct = refine_multiclass(case.image, case.coarse.planes, est.config())
    assert np.array_equal(refined, direct.refined)
    assert np.array_equal(est.labels_, direct.labels)


def test_estimator_from_preset():
    est = RegionGrowingRefiner.from_preset("largefov", rng_seed=3)
    assert est.gamma_high == 48 and est.runs == 2 and est.rng_seed == 3
