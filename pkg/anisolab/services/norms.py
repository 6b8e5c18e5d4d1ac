import itertools
import logging
import math
from typing import Optional

import numpy as np
from scipy import fft as sfft

from anisolab.config import settings
from anisolab.exceptions import BandLimitError, BandRangeError, ParameterRangeError
from anisolab.schemas.grid import GridFunction
from anisolab.schemas.norms import BesovProfile
from anisolab.services.grid_spectral import dyadic_symbol, frequency_radius, out_of_band_fraction

logger = logging.getLogger(__name__)


def weighted_lp(values: np.ndarray, cell_volume: float, p: float, weights: Optional[np.ndarray] = None) -> float:
    """Rectangle-rule L_p norm, optionally against a density."""
    if p < 1:
        raise ParameterRangeError(f"p must be >= 1, got {p}")
    magnitude = np.abs(values)
    if math.isinf(p):
        return float(np.max(magnitude)) if magnitude.size else 0.0
    density = cell_volume if weights is None else weights * cell_volume
    return float(np.sum(magnitude ** p * density) ** (1.0 / p))


def lp_norm(f: GridFunction, p: float) -> float:
    return weighted_lp(f.values, f.spec.cell_volume, p)


def besov_profile(f: GridFunction, s: float, p: float, r: Optional[float] = None) -> BesovProfile:
    """max over retained bands of 2^(l s) ||S_l f||_p, with the per-band table."""
    r = settings.SMOOTHNESS_R if r is None else r
    if abs(s) >= r - 1:
        raise ParameterRangeError(f"|s| = {abs(s)} must stay below r - 1 = {r - 1}")
    if p < 1:
        raise ParameterRangeError(f"p must be >= 1, got {p}")
    spec = f.spec
    if spec.n_max < 2:
        raise BandRangeError(f"band budget exhausted (n_max = {spec.n_max})")

    f_hat = sfft.fftn(f.values)
    radius = frequency_radius(spec)
    table = []
    for band in range(spec.n_max + 1):
        block = sfft.ifftn(dyadic_symbol(band, radius) * f_hat)
        table.append(2.0 ** (band * s) * weighted_lp(block, spec.cell_volume, p))

    best = int(np.argmax(table))
    return BesovProfile(value=table[best], band=best, table=table, n_max=spec.n_max, s=s, p=p)


def besov_norm(f: GridFunction, s: float, p: float, r: Optional[float] = None) -> float:
    return besov_profile(f, s, p, r).value


def bessel_symbol(f: GridFunction, t: float) -> np.ndarray:
    return (1.0 + frequency_radius(f.spec) ** 2) ** (t / 2.0)


def sobolev_norm(f: GridFunction, t: float, p: float) -> float:
    """||(id + Delta)^(t/2) f||_p through the Bessel symbol."""
    if not 1.0 < p < math.inf:
        raise ParameterRangeError(f"Sobolev norms need 1 < p < inf, got {p}")
    values = sfft.ifftn(bessel_symbol(f, t) * sfft.fftn(f.values))
    return weighted_lp(values, f.spec.cell_volume, p)


def nikolskij_ratio(f: GridFunction, p: float, p1: float, M: float) -> float:
    """||f||_p / (M^(D (1/p1 - 1/p)) ||f||_p1) for f band-limited to |xi| <= M."""
    if not p > p1 >= 1:
        raise ParameterRangeError(f"need p > p1 >= 1, got p={p}, p1={p1}")
    leak = out_of_band_fraction(f.values, f.spec, M)
    if leak >= settings.BAND_LIMIT_TOL:
        raise BandLimitError(f"f carries {leak:.3e} of its energy outside |xi| <= {M}")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    denominator = M ** (f.spec.dim * (1.0 / p1 - inv_p)) * lp_norm(f, p1)
    if denominator == 0.0:
        raise ParameterRangeError("Nikol'skij ratio of the zero function is undefined")
    return lp_norm(f, p) / denominator


def cu_norm(f: GridFunction, u: int = 1) -> float:
    """max over |alpha| <= u of sup |D^alpha f| by centered finite differences."""
    best = f.sup_norm()
    h = f.spec.spacing
    for order in range(1, u + 1):
        for axes in itertools.combinations_with_replacement(range(f.spec.dim), order):
            derivative = f.values
            for axis in axes:
                derivative = np.gradient(derivative, h, axis=axis)
            best = max(best, float(np.max(np.abs(derivative))))
    return best
