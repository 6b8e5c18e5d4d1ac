import math
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from anisolab.schemas.grid import GridFunction


# ===============================
# ANISOTROPIC NORM
# ===============================
class AnisoNormReport(BaseModel):
    """Value of the anisotropic norm with the leaf and band pair that attains it.

    ``band_table[leaf_id][l]`` holds 2^(l t) ||S_l phi||^s_{p,Gamma}.
    """

    value: float = Field(ge=0.0)
    leaf_id: int
    l_outer: int
    l_inner: int
    band_table: Dict[int, List[float]]
    n_max: int
    l_inner_max: int

    @model_validator(mode="after")
    def validate_table(self):
        if self.band_table:
            best = max(max(row) for row in self.band_table.values() if row)
            if not math.isclose(best, self.value, rel_tol=1e-12, abs_tol=0.0):
                raise ValueError("report value must equal the max of its band table")
        return self

    def merge(self, other: "AnisoNormReport") -> "AnisoNormReport":
        """Max-reduction of two reports over disjoint leaf sets."""
        table = dict(self.band_table)
        table.update(other.band_table)
        winner = self if self.value >= other.value else other
        return winner.model_copy(update={
            "band_table": table,
            "l_inner_max": max(self.l_inner_max, other.l_inner_max),
        })

    def to_record(self) -> Dict:
        return {
            "value": self.value,
            "leaf_id": self.leaf_id,
            "l_outer": self.l_outer,
            "l_inner": self.l_inner,
            "band_table": {str(k): v for k, v in self.band_table.items()},
        }


# ===============================
# PARAPRODUCT
# ===============================
class ParaproductTerms(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pi1: GridFunction
    pi2: GridFunction
    pi3: GridFunction
    j_max: int
    residual: float

    def total(self) -> np.ndarray:
        return self.pi1.values + self.pi2.values + self.pi3.values


class ProductProbe(BaseModel):
    """Ratio behind the product inequality with a single-coordinate factor."""

    value: float
    within_range: bool
    s: float
    p: float
    numerator: float
    denominator: float


# ===============================
# KERNEL PROBE
# ===============================
class KernelProbe(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int
    k_s: int
    leaf_id: int
    leaf_kind: str
    separation: int
    status: Literal["separated", "decaying", "coupled"]
    kernel: np.ndarray
    probe_points: np.ndarray
    max_abs: float
    decay_profile: List[Tuple[int, float]]
    decay_exponent: float
    envelope_constant: Optional[float] = None

    @model_validator(mode="after")
    def validate_kernel(self):
        if not np.all(np.isfinite(self.kernel)):
            raise ValueError("kernel must be finite")
        return self

    def to_record(self) -> Dict:
        return {
            "k": self.k,
            "k_s": self.k_s,
            "leaf_id": self.leaf_id,
            "leaf_kind": self.leaf_kind,
            "separation": self.separation,
            "status": self.status,
            "max_abs": self.max_abs,
            "decay_exponent": self.decay_exponent,
            "envelope_constant": self.envelope_constant,
            "decay_profile": [list(item) for item in self.decay_profile],
        }
