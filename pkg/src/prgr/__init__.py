"""Probabilistic region-growing refinement of semantic segmentation scoremaps.

Per-class confidence maps from any segmentation model are sharpened by Monte
Carlo seeded region growing: high-confidence pixels seed clusters modeled as
5-D Gaussians over position and CIELab color with conjugate-prior statistics,
cluster-averaged scores are pooled over iterations at stratified seed
spacings with antithetic color-variance pairs, and the across-iteration
variance doubles as a per-pixel uncertainty estimate.
"""

from .bundleio import (PrgrError, ScoreStack, load_bundle, load_labels_png,
                       load_scores_png, save_bundle, save_labels_png)
from .clusters import (ClusterStats, assignment_probability, chi2_cdf5,
                       init_cluster, mahalanobis, update_cluster)
from .color import FeatureImage, build_feature_image, srgb_to_cielab
from .config import PRESETS, RefineConfig, preset_config
from .confidence import (CdfPair, estimate_score_cdfs,
                         high_confidence_probability, seed_weight_field)
from .grower import ORPHAN, grow
from .metrics import (EvalReport, boundary_f, evaluate, iou, trimap_iou,
                      variance_accuracy_curve)
from .refiner import (RefineOutput, RegionGrowingRefiner, combine_runs,
                      refine_class, refine_multiclass, sample_gammas,
                      sample_seeds)
from .rng import Pcg32
from .synth import SynthCase, SynthSpec, synth_case

__version__ = "0.1.0"

__all__ = [
    "CdfPair", "ClusterStats", "EvalReport", "FeatureImage", "ORPHAN",
    "PRESETS", "Pcg32", "PrgrError", "RefineConfig", "RefineOutput",
    "RegionGrowingRefiner", "ScoreStack", "SynthCase", "SynthSpec",
    "assignment_probability", "boundary_f", "build_feature_image",
    "chi2_cdf5", "combine_runs", "estimate_score_cdfs", "evaluate", "grow",
    "high_confidence_probability", "init_cluster", "iou", "load_bundle",
    "load_labels_png", "load_scores_png", "mahalanobis", "preset_config",
    "refine_class", "refine_multiclass", "sample_gammas", "sample_seeds",
    "save_bundle", "save_labels_png", "seed_weight_field", "srgb_to_cielab",
    "synth_case", "trimap_iou", "update_cluster", "variance_accuracy_curve",
]
