"""Validated pipeline configuration shared by the CLI and the HTTP service.

Every invariant violation is reported with the name of the domain error it
mirrors (for example RadiusNonPositive) so service clients can match 422
bodies against the same rules the core modules enforce.
"""

from __future__ import annotations

import json

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .phantom import Landmarks, OstiumMarker
from .segmentation import IntensityWindow, SeedPoint
from .solver import SolverParams


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WindowConfig(_Strict):
    lower: float
    upper: float

    @model_validator(mode="after")
    def _ordered(self):
        if self.lower > self.upper:
            raise ValueError("IntensityWindow: lower must be <= upper")
        return self

    def to_window(self) -> IntensityWindow:
        return IntensityWindow(self.lower, self.upper)


class SkeletonConfig(_Strict):
    prune_length: int = 10
    sample_step: float = 1.0

    @field_validator("prune_length")
    @classmethod
    def _prune(cls, v):
        if v < 1:
            raise ValueError("prune_length must be >= 1")
        return v

    @field_validator("sample_step")
    @classmethod
    def _step(cls, v):
        if v <= 0:
            raise ValueError("sample_step must be > 0")
        return v


class StentConfig(_Strict):
    n_t: int = 12
    trunk_rings: int = 26
    limb_rings: int = 13
    r0_trunk: float = 4.0
    r0_limb: float = 3.0

    @field_validator("r0_trunk", "r0_limb")
    @classmethod
    def _radius(cls, v, info):
        if v <= 0:
            raise ValueError(f"RadiusNonPositive: {info.field_name} must be > 0")
        return v

    @field_validator("n_t")
    @classmethod
    def _nt(cls, v):
        if v < 8 or v % 2:
            raise ValueError("n_t must be even and >= 8")
        return v

    @field_validator("trunk_rings", "limb_rings")
    @classmethod
    def _rings(cls, v, info):
        if v < 3:
            raise ValueError(f"{info.field_name} must be >= 3")
        return v


class SolverConfig(_Strict):
    R_trunk: float = 4.0
    R_limb: float = 3.0
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 0.1
    w4: float = 0.1
    w5: float = 0.1
    w_vesselWall: float = 1.0
    w_balloon: float = 1.0
    F_pressure: float = 0.5
    gamma: float = 1.0
    max_iterations: int = 100
    convergence_eps: float = 1e-3
    balloon_saturation: float | None = None
    # "deploy" runs the parameters as given; "measure" applies the
    # expansion configuration (internal weights scaled down, limit radii
    # raised above the lumen) before simulating
    mode: str = "deploy"
    lumen_radius_hint: float = 25.0

    @field_validator("R_trunk", "R_limb")
    @classmethod
    def _radius(cls, v, info):
        if v <= 0:
            raise ValueError(f"RadiusNonPositive: {info.field_name} must be > 0")
        return v

    @field_validator("w1", "w2", "w3", "w4", "w5", "w_vesselWall",
                     "w_balloon", "F_pressure")
    @classmethod
    def _weights(cls, v, info):
        if v < 0:
            raise ValueError(f"{info.field_name} must be >= 0")
        return v

    @field_validator("gamma")
    @classmethod
    def _gamma(cls, v):
        if v <= 0:
            raise ValueError("SingularSystem: gamma must be > 0")
        return v

    @field_validator("mode")
    @classmethod
    def _mode(cls, v):
        if v not in ("deploy", "measure"):
            raise ValueError("mode must be 'deploy' or 'measure'")
        return v

    def to_params(self) -> SolverParams:
        kw = self.model_dump(exclude={"mode", "lumen_radius_hint"})
        if kw["balloon_saturation"] is None:
            kw["balloon_saturation"] = float("inf")
        return SolverParams(**kw)


class LandmarksConfig(_Strict):
    proximal_site: float
    aneurysm_region: tuple[float, float]
    distal_neck_region: tuple[float, float]

    @model_validator(mode="after")
    def _ordered(self):
        a0, a1 = self.aneurysm_region
        d0, d1 = self.distal_neck_region
        if not (0 <= self.proximal_site < a0 <= a1 <= d0 <= d1):
            raise ValueError(
                "LandmarkOutOfRange: landmarks must be ordered proximal to distal")
        return self

    def to_landmarks(self) -> Landmarks:
        return Landmarks(self.proximal_site, tuple(self.aneurysm_region),
                         tuple(self.distal_neck_region))


class MarkerConfig(_Strict):
    point: tuple[float, float, float]
    radius: float
    label: str

    @field_validator("radius")
    @classmethod
    def _radius(cls, v):
        if v <= 0:
            raise ValueError("RadiusNonPositive: marker radius must be > 0")
        return v

    def to_marker(self) -> OstiumMarker:
        return OstiumMarker(tuple(self.point), self.radius, self.label)


class PipelineConfig(_Strict):
    """Full run description: input volume, every stage's parameters, and
    where artifacts go. Unknown keys are rejected."""

    volume: str  # path to a .svh volume header
    seed: tuple[float, float, float]
    window: WindowConfig
    skeleton: SkeletonConfig = SkeletonConfig()
    stent: StentConfig = StentConfig()
    solver: SolverConfig = SolverConfig()
    landmarks: LandmarksConfig | None = None
    markers: list[MarkerConfig] = Field(default_factory=list)

    def to_seed(self) -> SeedPoint:
        return SeedPoint(tuple(self.seed))

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.model_validate(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.model_dump_json(indent=1))
