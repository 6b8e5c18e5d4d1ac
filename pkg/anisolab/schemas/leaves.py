import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from anisolab.config import settings
from anisolab.schemas.grid import GridSpec

LeafKind = Literal["horizontal", "affine", "sinusoidal", "quadratic"]


# ===============================
# CONE
# ===============================
class UnstableCone(BaseModel):
    """Directions within ``aperture`` of the span of ``axis`` (a d x d_u orthonormal frame)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    d_s: int = Field(ge=1)
    d_u: int = Field(ge=1)
    axis: np.ndarray
    aperture: float = Field(gt=0.0, lt=math.pi / 2)
    margin: float = Field(default_factory=lambda: math.radians(settings.CHORD_MARGIN_DEG), ge=0.0)

    @field_validator("axis", mode="before")
    @classmethod
    def copy_axis(cls, v):
        axis = np.array(v, dtype=np.float64)
        if axis.ndim == 1:
            axis = axis[:, None]
        axis.setflags(write=False)
        return axis

    @model_validator(mode="after")
    def validate_cone(self):
        d = self.d_s + self.d_u
        if self.axis.shape != (d, self.d_u):
            raise ValueError(f"axis must be a {d} x {self.d_u} frame, got {self.axis.shape}")
        if not np.allclose(self.axis.T @ self.axis, np.eye(self.d_u), atol=1e-10):
            raise ValueError("axis columns must be orthonormal")
        if self.aperture + self.margin >= self.horizontal_angle - 1e-12:
            raise ValueError(
                "cone enlargement meets the horizontal subspace: "
                f"aperture {math.degrees(self.aperture):.3f} deg + margin "
                f"{math.degrees(self.margin):.3f} deg >= {math.degrees(self.horizontal_angle):.3f} deg"
            )
        return self

    @property
    def dim(self) -> int:
        return self.d_s + self.d_u

    @property
    def horizontal_angle(self) -> float:
        """Smallest principal angle between the axis subspace and R^{d_s} x {0}."""
        cosine = float(np.linalg.norm(self.axis[: self.d_s, :], ord=2))
        return math.acos(min(1.0, max(-1.0, cosine)))

    @property
    def max_chord_angle(self) -> float:
        return self.horizontal_angle - self.aperture - self.margin

    @property
    def max_slope(self) -> float:
        return math.tan(self.max_chord_angle)


# ===============================
# LEAVES
# ===============================
class AdmissibleLeaf(BaseModel):
    """
    Graph leaf z -> (z, gamma(z)) translated by ``offset`` on the periodic box.

    Coefficients per family (curved profiles act on the first unstable coordinate):
      horizontal: ()
      affine:     row-major entries of the d_u x d_s matrix A, gamma(z) = A z
      sinusoidal: (amplitude, phase, m_1..m_ds), gamma(z) = amplitude sin(w.z + phase),
                  w = 2 pi m / L
      quadratic:  (curvature, b_1..b_ds), gamma(z) = curvature |z|^2 + b.z
    """

    model_config = ConfigDict(frozen=True)

    leaf_id: int = 0
    representative: int = 0
    kind: LeafKind
    coefficients: Tuple[float, ...] = ()
    d_s: int = Field(ge=1)
    d_u: int = Field(ge=1)
    box_length: float = Field(gt=0.0)
    offset: Tuple[float, ...] = ()
    smoothness: float = Field(default_factory=lambda: settings.SMOOTHNESS_R, gt=1.0)
    chart_bound: float = Field(default_factory=lambda: settings.CHART_BOUND, gt=0.0)

    @model_validator(mode="after")
    def validate_shape(self):
        expected = {
            "horizontal": 0,
            "affine": self.d_u * self.d_s,
            "sinusoidal": 2 + self.d_s,
            "quadratic": 1 + self.d_s,
        }[self.kind]
        if len(self.coefficients) != expected:
            raise ValueError(f"{self.kind} leaf needs {expected} coefficients, got {len(self.coefficients)}")
        if self.offset and len(self.offset) != self.d_s + self.d_u:
            raise ValueError("offset must have one entry per ambient axis")
        return self

    @property
    def dim(self) -> int:
        return self.d_s + self.d_u

    @property
    def shift_vector(self) -> np.ndarray:
        return np.asarray(self.offset, dtype=np.float64) if self.offset else np.zeros(self.dim)

    @property
    def wave_vector(self) -> np.ndarray:
        modes = np.asarray(self.coefficients[2:], dtype=np.float64)
        return 2 * math.pi * modes / self.box_length

    def _wrap(self, z: np.ndarray) -> np.ndarray:
        half = self.box_length / 2
        return np.mod(z + half, self.box_length) - half

    def profile(self, z: np.ndarray) -> np.ndarray:
        """gamma on chart points z of shape (M, d_s), untranslated; returns (M, d_u)."""
        z = np.atleast_2d(z)
        out = np.zeros((z.shape[0], self.d_u))
        c = self.coefficients
        if self.kind == "affine":
            A = np.asarray(c, dtype=np.float64).reshape(self.d_u, self.d_s)
            out = z @ A.T
        elif self.kind == "sinusoidal":
            out[:, 0] = c[0] * np.sin(z @ self.wave_vector + c[1])
        elif self.kind == "quadratic":
            out[:, 0] = c[0] * np.sum(z ** 2, axis=1) + z @ np.asarray(c[1:], dtype=np.float64)
        return out

    def profile_jacobian(self, z: np.ndarray) -> np.ndarray:
        """D gamma on chart points, shape (M, d_u, d_s)."""
        z = np.atleast_2d(z)
        jac = np.zeros((z.shape[0], self.d_u, self.d_s))
        c = self.coefficients
        if self.kind == "affine":
            jac[:] = np.asarray(c, dtype=np.float64).reshape(self.d_u, self.d_s)
        elif self.kind == "sinusoidal":
            w = self.wave_vector
            jac[:, 0, :] = (c[0] * np.cos(z @ w + c[1]))[:, None] * w[None, :]
        elif self.kind == "quadratic":
            jac[:, 0, :] = 2 * c[0] * z + np.asarray(c[1:], dtype=np.float64)[None, :]
        return jac

    def graph(self, z: np.ndarray) -> np.ndarray:
        """Unstable coordinates of the translated leaf over chart points z (periodic chart)."""
        shift = self.shift_vector
        local = self._wrap(np.atleast_2d(z) - shift[: self.d_s])
        return self.profile(local) + shift[self.d_s:]

    def jacobian_weights(self, z: np.ndarray) -> np.ndarray:
        """sqrt det(I + D gamma^T D gamma), the density of the leaf volume in the chart."""
        shift = self.shift_vector
        jac = self.profile_jacobian(self._wrap(np.atleast_2d(z) - shift[: self.d_s]))
        gram = np.eye(self.d_s)[None, :, :] + np.einsum("mui,muj->mij", jac, jac)
        return np.sqrt(np.linalg.det(gram))

    def slope_bound(self) -> float:
        """Analytic sup of the operator norm of D gamma over the chart box."""
        c = self.coefficients
        if self.kind == "horizontal":
            return 0.0
        if self.kind == "affine":
            return float(np.linalg.norm(np.asarray(c).reshape(self.d_u, self.d_s), ord=2))
        if self.kind == "sinusoidal":
            return abs(c[0]) * float(np.linalg.norm(self.wave_vector))
        corner = self.box_length / 2 * math.sqrt(self.d_s)
        return 2 * abs(c[0]) * corner + float(np.linalg.norm(c[1:]))

    def chart_norm(self) -> float:
        """C^r chart seminorm: max over derivative orders 1..ceil(r) of the sup over the chart."""
        orders = range(1, int(math.ceil(self.smoothness)) + 1)
        c = self.coefficients
        if self.kind == "horizontal":
            return 0.0
        if self.kind == "affine":
            return self.slope_bound()
        if self.kind == "sinusoidal":
            w = float(np.linalg.norm(self.wave_vector))
            return max(abs(c[0]) * w ** k for k in orders)
        return max(self.slope_bound(), 2 * abs(c[0]))

    @property
    def closes_on_box(self) -> bool:
        """True when the leaf is a closed submanifold of the periodic box."""
        if self.kind in ("horizontal", "sinusoidal"):
            return True
        if self.kind == "affine":
            return bool(np.allclose(self.coefficients, np.round(self.coefficients)))
        return False


class LeafFamilyConfig(BaseModel):
    """Counts and ranges used to draw a finite leaf family."""

    model_config = ConfigDict(extra="forbid")

    affine: int = Field(default=1, ge=0)
    sinusoidal: int = Field(default=1, ge=0)
    quadratic: int = Field(default=1, ge=0)
    translations: int = Field(default=8, ge=1)
    translation_step: Optional[float] = Field(default=None, gt=0.0)
    amplitude_low: float = Field(default=0.3, gt=0.0, le=1.0)
    amplitude_high: float = Field(default=0.8, gt=0.0, le=1.0)
    max_mode: int = Field(default=2, ge=1)
    chart_bound: float = Field(default_factory=lambda: settings.CHART_BOUND, gt=0.0)
    smoothness: float = Field(default_factory=lambda: settings.SMOOTHNESS_R, gt=1.0)
    family_file: Optional[str] = None

    @model_validator(mode="after")
    def validate_range(self):
        if self.amplitude_low > self.amplitude_high:
            raise ValueError("amplitude_low must not exceed amplitude_high")
        return self

    @property
    def representative_count(self) -> int:
        return self.affine + self.sinusoidal + self.quadratic


class LeafFamily(BaseModel):
    model_config = ConfigDict(frozen=True)

    leaves: List[AdmissibleLeaf]
    config: LeafFamilyConfig
    seed: int
    translation_step: float

    def __len__(self) -> int:
        return len(self.leaves)

    def __iter__(self):
        return iter(self.leaves)

    def translates_of(self, leaf: AdmissibleLeaf) -> List[AdmissibleLeaf]:
        return [other for other in self.leaves if other.representative == leaf.representative]

    def subset(self, leaf_ids) -> "LeafFamily":
        keep = set(leaf_ids)
        return self.model_copy(update={"leaves": [leaf for leaf in self.leaves if leaf.leaf_id in keep]})


class LeafFunction(BaseModel):
    """Chart samples of phi o pi_Gamma^-1 with the leaf volume density."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    leaf_id: int
    chart: GridSpec
    values: np.ndarray
    weights: np.ndarray

    @model_validator(mode="after")
    def validate_weights(self):
        if self.values.shape != self.chart.shape or self.weights.shape != self.chart.shape:
            raise ValueError("leaf samples must match the chart lattice")
        if np.any(self.weights < 1.0 - 1e-12):
            raise ValueError("leaf volume density must be >= 1")
        return self
