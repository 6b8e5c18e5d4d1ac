import math
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from anisolab.config import settings
from anisolab.schemas.leaves import LeafFamilyConfig
from anisolab.schemas.norms import NormParams

ExperimentKind = Literal["strichartz", "multiplier", "lemmas", "kernel-decay", "corpus"]
Verdict = Literal["bounded", "divergent", "inconclusive", "pass", "fail", "observed", "degenerate"]
CorpusKind = Literal[
    "gaussian",
    "wave_packet_aligned",
    "wave_packet_transverse",
    "plane_wave_mix",
    "band_limited",
    "smooth_bump",
    "x1_profile",
]

# members that are not compactly supported in the ball of radius K
UNSUPPORTED_KINDS = ("band_limited", "x1_profile")

CSV_COLUMNS = (
    "experiment", "p", "s", "t", "r", "N", "cone_theta", "u_lambda",
    "quantity", "value", "slope", "verdict", "seed",
)


def _split(value) -> List[str]:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return list(value)


# ===============================
# INDICATOR / CORPUS
# ===============================
class IndicatorSpec(BaseModel):
    """Half-space {x.u > c} or strip {c < x.u < c + B}, optionally mollified over width epsilon."""

    model_config = ConfigDict(frozen=True)

    normal: Tuple[float, ...]
    shape: Literal["half_space", "strip"] = "half_space"
    offset: float = 0.0
    width: Optional[float] = Field(default=None, gt=0.0)
    epsilon: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def validate_normal(self):
        norm = float(np.linalg.norm(self.normal))
        if not math.isclose(norm, 1.0, rel_tol=0.0, abs_tol=1e-12):
            raise ValueError(f"indicator normal must be a unit vector, got norm {norm}")
        return self

    @property
    def dim(self) -> int:
        return len(self.normal)

    def label(self) -> str:
        return "(" + " ".join(f"{u:g}" for u in self.normal) + ")"


class CorpusSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kinds: List[CorpusKind] = Field(default_factory=lambda: list(settings.default_corpus_kinds))
    count: int = Field(default=2, ge=1)
    seed: int = Field(default_factory=lambda: settings.SEED, ge=0)
    band_limit: float = Field(default=8.0, gt=0.0)
    boundary: Optional[IndicatorSpec] = None


# ===============================
# CONFIG FILE SECTIONS
# ===============================
class GridSection(BaseModel):
    """[grid]: lattice geometry shared by every resolution of a sweep."""

    model_config = ConfigDict(extra="forbid")

    dim: int = Field(default=2, ge=1, le=3)
    d_s: int = Field(default=1, ge=1)
    box_length: Optional[float] = Field(default=None, gt=0.0)
    support_radius: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def fill_box(self):
        # 1D runs use the wider box
        if self.box_length is None:
            self.box_length = 2 * math.pi if self.dim == 1 else math.pi
        if self.support_radius is None:
            self.support_radius = self.box_length / 4
        if self.d_s > self.dim or (self.dim > 1 and self.d_s == self.dim):
            raise ValueError(f"d_s={self.d_s} leaves no unstable direction in dimension {self.dim}")
        return self


class NormSection(BaseModel):
    """[norm]: explicit (p, s, t) points for anisotropic runs and a (p, t) lattice for Sobolev scans."""

    model_config = ConfigDict(extra="forbid")

    points: List[Tuple[float, float, float]] = Field(default_factory=lambda: [(2.0, -0.4, 0.2)])
    p: List[float] = Field(default_factory=lambda: [1.5, 2.0, 4.0])
    t_min: float = -1.0
    t_max: float = 1.0
    t_step: float = Field(default=0.125, gt=0.0)
    r: float = Field(default_factory=lambda: settings.SMOOTHNESS_R, gt=1.0)

    @field_validator("points", mode="before")
    @classmethod
    def parse_points(cls, v):
        if isinstance(v, str):
            return [tuple(float(x) for x in item.split("/")) for item in _split(v)]
        return v

    @field_validator("p", mode="before")
    @classmethod
    def parse_p(cls, v):
        return [float(x) for x in _split(v)]

    @model_validator(mode="after")
    def validate_range(self):
        if self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")
        if any(p <= 1.0 for p in self.p):
            raise ValueError("every p must exceed 1")
        return self

    def t_values(self) -> List[float]:
        count = int(math.floor((self.t_max - self.t_min) / self.t_step + 1e-9)) + 1
        return [round(self.t_min + i * self.t_step, 12) for i in range(count)]

    def params(self) -> List[NormParams]:
        return [NormParams(p=p, s=s, t=t, r=self.r) for p, s, t in self.points]


class ConeSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta_deg: float = Field(default=30.0, gt=0.0, lt=90.0)
    margin_deg: float = Field(default_factory=lambda: settings.CHORD_MARGIN_DEG, ge=0.0)
    axis: Optional[List[float]] = None

    @field_validator("axis", mode="before")
    @classmethod
    def parse_axis(cls, v):
        if v is None:
            return None
        return [float(x) for x in _split(v)]


class IndicatorSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: Literal["half_space", "strip"] = "half_space"
    normal: Optional[List[float]] = None
    offset: float = 0.0
    width: Optional[float] = Field(default=None, gt=0.0)
    epsilon_cells: List[float] = Field(default_factory=lambda: [0.0, 1.0])

    @field_validator("normal", mode="before")
    @classmethod
    def parse_normal(cls, v):
        if v is None:
            return None
        return [float(x) for x in _split(v)]

    @field_validator("epsilon_cells", mode="before")
    @classmethod
    def parse_epsilons(cls, v):
        values = [float(x) for x in _split(v)]
        if any(x < 0 for x in values):
            raise ValueError("epsilon_cells must be nonnegative")
        return values

    def build(self, dim: int, spacing: float, support_radius: float, epsilon_cells: float) -> IndicatorSpec:
        if self.normal is None:
            normal = np.zeros(dim)
            normal[0] = 1.0
        else:
            normal = np.asarray(self.normal, dtype=np.float64)
            if normal.shape != (dim,):
                raise ValueError(f"indicator normal needs {dim} entries, got {normal.size}")
            normal = normal / np.linalg.norm(normal)
        width = self.width
        if self.shape == "strip" and width is None:
            width = support_radius / 2
        return IndicatorSpec(
            normal=tuple(float(u) for u in normal),
            shape=self.shape,
            offset=self.offset,
            width=width,
            epsilon=epsilon_cells * spacing,
        )


class CorpusSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kinds: List[CorpusKind] = Field(default_factory=lambda: list(settings.default_corpus_kinds))
    count: int = Field(default=2, ge=1)
    band_limit: float = Field(default=8.0, gt=0.0)
    on_boundary: bool = True

    @field_validator("kinds", mode="before")
    @classmethod
    def parse_kinds(cls, v):
        return _split(v)


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    resolutions: List[int] = Field(default_factory=lambda: [64, 128, 256, 512])
    bounded_slope: float = Field(default_factory=lambda: settings.BOUNDED_SLOPE)
    divergent_slope: float = Field(default_factory=lambda: settings.DIVERGENT_SLOPE)
    contract_margin: float = Field(default_factory=lambda: settings.CONTRACT_MARGIN, ge=0.0)
    divergence_margin: float = Field(default_factory=lambda: settings.DIVERGENCE_MARGIN, ge=0.0)
    pairs: int = Field(default_factory=lambda: settings.LEMMA_PAIRS, ge=1)
    diagnostics: bool = False
    kernel_band: int = Field(default=1, ge=0)

    @field_validator("resolutions", mode="before")
    @classmethod
    def parse_resolutions(cls, v):
        return [int(x) for x in _split(v)]

    @model_validator(mode="after")
    def validate_sweep(self):
        if len(self.resolutions) < 3:
            raise ValueError("a sweep needs at least 3 resolutions for slope fitting")
        if sorted(set(self.resolutions)) != self.resolutions:
            raise ValueError("resolutions must be strictly increasing")
        if self.bounded_slope >= self.divergent_slope:
            raise ValueError("bounded_slope must be below divergent_slope")
        if self.divergence_margin < self.contract_margin:
            raise ValueError("divergence_margin must not be below contract_margin")
        return self


class ExperimentConfig(BaseModel):
    """A complete experiment file plus the command-line overrides."""

    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind
    grid: GridSection = Field(default_factory=GridSection)
    norm: NormSection = Field(default_factory=NormSection)
    cone: ConeSection = Field(default_factory=ConeSection)
    leaves: LeafFamilyConfig = Field(default_factory=LeafFamilyConfig)
    indicator: IndicatorSection = Field(default_factory=IndicatorSection)
    corpus: CorpusSection = Field(default_factory=CorpusSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    seed: int = Field(default_factory=lambda: settings.SEED, ge=0)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)
    output_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)
    output_format: Literal["csv", "json"] = Field(default_factory=lambda: settings.OUTPUT_FORMAT)

    def corpus_spec(self, boundary: Optional[IndicatorSpec] = None) -> CorpusSpec:
        return CorpusSpec(
            kinds=self.corpus.kinds, count=self.corpus.count, seed=self.seed, band_limit=self.corpus.band_limit,
            boundary=boundary,
        )


# ===============================
# RESULTS
# ===============================
class ResultRecord(BaseModel):
    """One output row; every row echoes its full parameter tuple."""

    model_config = ConfigDict(frozen=True)

    experiment: str
    p: Optional[float] = None
    s: Optional[float] = None
    t: Optional[float] = None
    r: Optional[float] = None
    N: Optional[int] = None
    cone_theta: Optional[float] = None
    u_lambda: str = ""
    quantity: str
    value: float
    slope: Optional[float] = None
    verdict: Verdict
    seed: int

    def row(self) -> Dict:
        return {column: getattr(self, column) for column in CSV_COLUMNS}

    def sort_key(self) -> Tuple:
        return (
            self.experiment, self.quantity, self.u_lambda,
            _key(self.p), _key(self.s), _key(self.t), _key(self.N), self.slope is not None,
        )


def _key(value) -> float:
    return -math.inf if value is None else float(value)
