"""Refinement configuration and the per-network presets."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace


@dataclass
class RefineConfig:
    gamma_low: int = 2
    gamma_high: int = 16
    n_gamma: int = 10
    iterations_per_gamma: int = 2
    rho: float = 0.6
    lam: float = 27.0
    alpha_spatial: float = 5.0
    alpha_color: float = 0.1
    kappa0: float = 1.0
    sigma0_l: float = 1000.0
    sigma0_ab: float = 300.0
    eta: int = 8
    visit_cap: int = 8
    runs: int = 1
    rng_seed: int = 0
    cdf_points: int = 256
    p_ih_floor: float = 0.2

    def __post_init__(self):
        self.validate()

    @property
    def n_iterations(self) -> int:
        """Monte Carlo iterations per run (n_gamma spacings x antithetic pair)."""
        return self.n_gamma * self.iterations_per_gamma

    def validate(self) -> None:
        if self.gamma_low < 2:
            raise ValueError("gamma_low must be >= 2")
        if self.gamma_high < self.gamma_low:
            raise ValueError("gamma_high must be >= gamma_low")
        if self.n_gamma < 1:
            raise ValueError("n_gamma must be >= 1")
        if self.iterations_per_gamma < 1:
            raise ValueError("iterations_per_gamma must be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        for name in ("lam", "alpha_spatial", "alpha_color", "kappa0",
                     "sigma0_l", "sigma0_ab"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.eta < 1:
            raise ValueError("eta must be >= 1")
        if self.visit_cap < 1:
            raise ValueError("visit_cap must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.cdf_points < 2:
            raise ValueError("cdf_points must be >= 2")
        if not 0.0 < self.p_ih_floor <= 1.0:
            raise ValueError("p_ih_floor must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RefineConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RefineConfig":
        return cls.from_dict(json.loads(text))

    def with_overrides(self, **kw) -> "RefineConfig":
        return replace(self, **kw)


# Per-network defaults: maximum seed spacing and number of full runs
# (two chained runs for the coarsest predictors).
PRESETS: dict[str, dict] = {
    "largefov": {"gamma_high": 48, "runs": 2},
    "v2vgg": {"gamma_high": 32, "runs": 2},
    "v2resnet": {"gamma_high": 24, "runs": 1},
    "v3plus": {"gamma_high": 16, "runs": 1},
    "custom": {},
}


def preset_config(name: str, **overrides) -> RefineConfig:
    """Config for a named preset, with optional field overrides applied."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    fields = dict(PRESETS[name])
    fields.update(overrides)
    return RefineConfig(**fields)
