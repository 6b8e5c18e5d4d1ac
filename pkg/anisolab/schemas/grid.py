import math
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from anisolab.config import settings
from anisolab.utils.helpers import is_power_of_two

# Six dyadic bands must fit below Nyquist; n_max keeps one more band of guard.
MIN_BANDS = 6
_REL_EPS = 1e-12


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# ===============================
# LATTICE SPEC
# ===============================
class GridSpec(BaseModel):
    """
    Periodic box of side L with N points per axis standing in for R^d.

    Spatial lattice x_j = (j - N/2) L/N, frequency lattice xi_k = 2 pi k / L with
    k in {-N/2, ..., N/2 - 1} stored in FFT order. The first ``d_s`` axes carry the
    stable coordinates x_-, the remaining ``d_u`` axes the unstable ones.
    """

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1, le=3)
    d_s: int = Field(ge=0)
    points_per_axis: int = Field(gt=0)
    box_length: float = Field(gt=0.0)
    support_radius: float = Field(gt=0.0)

    @field_validator("points_per_axis")
    @classmethod
    def validate_power_of_two(cls, v: int) -> int:
        if not is_power_of_two(v):
            raise ValueError(f"points_per_axis must be a power of two, got {v}")
        return v

    @model_validator(mode="after")
    def validate_geometry(self):
        if self.d_s > self.dim:
            raise ValueError(f"d_s={self.d_s} exceeds dim={self.dim}")
        if self.support_radius > self.box_length / 4 * (1 + _REL_EPS):
            raise ValueError(
                f"support_radius {self.support_radius} exceeds L/4 = {self.box_length / 4}"
            )
        if 2.0 ** MIN_BANDS > self.nyquist_frequency * (1 + _REL_EPS):
            raise ValueError(
                f"fewer than {MIN_BANDS} dyadic bands fit below Nyquist "
                f"(pi N / L = {self.nyquist_frequency:.4g})"
            )
        return self

    @classmethod
    def create(cls, d: int, d_s: int, N: int, L: float, K_rad: float) -> "GridSpec":
        return cls(dim=d, d_s=d_s, points_per_axis=N, box_length=L, support_radius=K_rad)

    @property
    def d_u(self) -> int:
        return self.dim - self.d_s

    @property
    def N(self) -> int:
        return self.points_per_axis

    @property
    def L(self) -> float:
        return self.box_length

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def frequency_step(self) -> float:
        return 2 * math.pi / self.box_length

    @property
    def nyquist_frequency(self) -> float:
        return math.pi * self.points_per_axis / self.box_length

    @property
    def guard_frequency(self) -> float:
        return self.nyquist_frequency / 2

    @property
    def n_max(self) -> int:
        """Largest n with 2^(n+1) <= pi N / (2L)."""
        n = -1
        while 2.0 ** (n + 2) <= self.guard_frequency * (1 + _REL_EPS):
            n += 1
        return n

    def axis_coordinates(self) -> np.ndarray:
        return (np.arange(self.points_per_axis) - self.points_per_axis // 2) * self.spacing

    def axis_frequencies(self) -> np.ndarray:
        return 2 * math.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        axis = self.axis_coordinates()
        return tuple(np.meshgrid(*([axis] * self.dim), indexing="ij"))

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c ** 2 for c in self.coordinates()))

    def chart_spec(self) -> "GridSpec":
        """The d_s-dimensional lattice carried by leaf charts."""
        return GridSpec(
            dim=self.d_s,
            d_s=self.d_s,
            points_per_axis=self.points_per_axis,
            box_length=self.box_length,
            support_radius=self.support_radius,
        )

    def line_spec(self) -> "GridSpec":
        """One-dimensional lattice along the first axis."""
        return GridSpec(
            dim=1,
            d_s=1,
            points_per_axis=self.points_per_axis,
            box_length=self.box_length,
            support_radius=self.support_radius,
        )

    def same_lattice(self, other: "GridSpec") -> bool:
        return (
            self.dim == other.dim
            and self.points_per_axis == other.points_per_axis
            and math.isclose(self.box_length, other.box_length, rel_tol=1e-14)
        )


# ===============================
# SAMPLED FUNCTIONS
# ===============================
class GridFunction(BaseModel):
    """Complex samples of a function on the spatial lattice of ``spec``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: GridSpec
    values: np.ndarray
    kind: str = "generic"
    supported: bool = False

    @field_validator("values", mode="before")
    @classmethod
    def copy_values(cls, v):
        return _readonly(np.array(v, dtype=np.complex128))

    @model_validator(mode="after")
    def validate_values(self):
        if self.values.shape != self.spec.shape:
            raise ValueError(f"values shape {self.values.shape} does not match lattice {self.spec.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        if self.supported:
            leak = self.support_leak()
            if leak >= settings.SUPPORT_TOL * max(1.0, self.sup_norm()):
                raise ValueError(f"values leak {leak:.3e} outside the support ball")
        return self

    def with_values(self, values: np.ndarray, kind: str = None, supported: bool = False) -> "GridFunction":
        return GridFunction(
            spec=self.spec,
            values=values,
            kind=kind or self.kind,
            supported=supported,
        )

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def support_leak(self) -> float:
        outside = self.spec.radius() > self.spec.support_radius
        if not np.any(outside):
            return 0.0
        return float(np.max(np.abs(self.values[outside])))


class SpectrumFunction(BaseModel):
    """Fourier coefficients on the frequency lattice, FFT ordering."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: GridSpec
    coeffs: np.ndarray

    @field_validator("coeffs", mode="before")
    @classmethod
    def copy_coeffs(cls, v):
        return _readonly(np.array(v, dtype=np.complex128))

    @model_validator(mode="after")
    def validate_coeffs(self):
        if self.coeffs.shape != self.spec.shape:
            raise ValueError(f"coeffs shape {self.coeffs.shape} does not match lattice {self.spec.shape}")
        return self


class SpectralWindow(BaseModel):
    """Sampled dyadic symbol psi_n on a D-dimensional frequency lattice."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    band: int = Field(ge=0)
    ambient_dim: int = Field(ge=1)
    spec: GridSpec
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def copy_values(cls, v):
        return _readonly(np.array(v, dtype=np.float64))

    @model_validator(mode="after")
    def validate_window(self):
        if self.values.shape != (self.spec.points_per_axis,) * self.ambient_dim:
            raise ValueError("window values do not match the frequency lattice")
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise ValueError("window values must lie in [0, 1]")
        return self

    @property
    def support(self) -> Tuple[float, float]:
        if self.band == 0:
            return 0.0, 2.0
        return 2.0 ** (self.band - 1), 2.0 ** (self.band + 1)
