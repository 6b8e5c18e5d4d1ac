import math
from typing import List

from pydantic import BaseModel, ConfigDict, Field

from anisolab.config import settings


class NormParams(BaseModel):
    """Integrability p, inner smoothness s, outer smoothness t and the leaf smoothness r."""

    model_config = ConfigDict(frozen=True)

    p: float = Field(gt=1.0)
    s: float
    t: float
    r: float = Field(default_factory=lambda: settings.SMOOTHNESS_R, gt=1.0)

    @property
    def p_dual(self) -> float:
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1.0)

    @property
    def norm_admissible(self) -> bool:
        """Range in which the anisotropic norm is defined: t-(r-1) < s < -t < 0."""
        return self.t - (self.r - 1.0) < self.s < -self.t < 0.0

    @property
    def theorem_admissible(self) -> bool:
        """Hypothesis of the bounded-multiplier theorem."""
        if math.isinf(self.p):
            return False
        lower = max(self.t - (self.r - 1.0), -1.0 + 1.0 / self.p)
        return lower < self.s < -self.t < 0.0

    def label(self) -> str:
        return f"p={self.p:g},s={self.s:g},t={self.t:g},r={self.r:g}"


class BesovProfile(BaseModel):
    """Per-band table behind a Besov B^s_{p,inf} value."""

    value: float
    band: int
    table: List[float]
    n_max: int
    s: float
    p: float
