import logging
import math
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy import fft as sfft

from anisolab.config import settings
from anisolab.exceptions import ParameterRangeError, SupportError
from anisolab.schemas.grid import GridFunction
from anisolab.schemas.leaves import AdmissibleLeaf, LeafFamily
from anisolab.schemas.norms import NormParams
from anisolab.schemas.reports import AnisoNormReport
from anisolab.services.grid_spectral import block_arrays, dyadic_symbol, frequency_radius
from anisolab.services.leaves import LeafRestrictor
from anisolab.services.norms import cu_norm, weighted_lp

logger = logging.getLogger(__name__)


def _check_inner_range(s: float, r: float):
    if not -(r - 1) < s < r - 1:
        raise ParameterRangeError(f"leafwise smoothness s={s} outside (-(r-1), r-1) with r={r}")


def chart_profile(chart_values: np.ndarray, weights: np.ndarray, restrictor: LeafRestrictor,
                  s: float, p: float) -> Tuple[float, int, List[float]]:
    """max over l_s of 2^(l_s s) ||psi_{l_s}^{(d_s)}(chart values)||_{L_p(mu_Gamma)}."""
    chart = restrictor.chart
    radius = frequency_radius(chart)
    chart_hat = sfft.fftn(chart_values)
    table = []
    for band in range(chart.n_max + 1):
        block = sfft.ifftn(dyadic_symbol(band, radius) * chart_hat)
        table.append(2.0 ** (band * s) * weighted_lp(block, chart.cell_volume, p, weights))
    best = int(np.argmax(table))
    return table[best], best, table


def chart_profiles(columns: np.ndarray, restrictor: LeafRestrictor, s: float, p: float) -> np.ndarray:
    """The chart_profile maximum for every trailing column of ``columns`` at once.

    ``columns`` has shape chart.shape + (m,); column j holds one set of chart values.
    """
    chart = restrictor.chart
    axes = tuple(range(chart.dim))
    radius = frequency_radius(chart)[..., None]
    density = (restrictor.weights * chart.cell_volume)[..., None]
    spectrum = sfft.fftn(columns, axes=axes)
    best = np.zeros(columns.shape[-1])
    for band in range(chart.n_max + 1):
        block = np.abs(sfft.ifftn(dyadic_symbol(band, radius) * spectrum, axes=axes))
        if math.isinf(p):
            value = block.max(axis=axes)
        else:
            value = np.sum(block ** p * density, axis=axes) ** (1.0 / p)
        best = np.maximum(best, 2.0 ** (band * s) * value)
    return best


def leafwise_profile(f: GridFunction, leaf: AdmissibleLeaf, s: float, p: float,
                     restrictor: Optional[LeafRestrictor] = None) -> Tuple[float, int, List[float]]:
    _check_inner_range(s, leaf.smoothness)
    restrictor = restrictor or LeafRestrictor(leaf, f.spec)
    samples = restrictor(f)
    return chart_profile(samples.values, samples.weights, restrictor, s, p)


def leafwise_besov_norm(f: GridFunction, leaf: AdmissibleLeaf, s: float, p: float,
                        restrictor: Optional[LeafRestrictor] = None) -> float:
    """||f||^s_{p,Gamma}: chart Besov B^s_{p,inf} of the restriction against the leaf volume."""
    return leafwise_profile(f, leaf, s, p, restrictor)[0]


def check_support(f: GridFunction):
    leak = f.support_leak()
    if leak >= settings.SUPPORT_TOL * max(1.0, f.sup_norm()):
        raise SupportError(f"f leaks {leak:.3e} outside the support ball of radius {f.spec.support_radius}")


def _leaf_report(leaf: AdmissibleLeaf, spectra: Dict[int, np.ndarray], restrictor: LeafRestrictor,
                 params: NormParams, n_max: int) -> AnisoNormReport:
    row = []
    best = (0.0, 0, 0)
    for band in range(n_max + 1):
        chart_values = restrictor.chart_values(spectrum=spectra[band])
        inner, inner_band, _ = chart_profile(chart_values, restrictor.weights, restrictor, params.s, params.p)
        value = 2.0 ** (band * params.t) * inner
        row.append(value)
        if value > best[0]:
            best = (value, band, inner_band)
    return AnisoNormReport(
        value=best[0], leaf_id=leaf.leaf_id, l_outer=best[1], l_inner=best[2],
        band_table={leaf.leaf_id: row}, n_max=n_max, l_inner_max=restrictor.chart.n_max,
    )


def aniso_norm(f: GridFunction, family: LeafFamily, params: NormParams, check_supported: bool = True,
               leaves: Optional[Iterable[AdmissibleLeaf]] = None) -> AnisoNormReport:
    """max over leaves and bands l of 2^(l t) ||S_l f||^s_{p,Gamma}."""
    if not params.norm_admissible:
        raise ParameterRangeError(f"inadmissible parameters: need t-(r-1) < s < -t < 0, got {params.label()}")
    if check_supported:
        check_support(f)
    spec = f.spec
    blocks = block_arrays(f.values, spec, range(spec.n_max + 1))
    unstable_axes = tuple(range(spec.d_s, spec.dim))
    spectra = {
        band: sfft.fftn(block, axes=unstable_axes).reshape(spec.N ** spec.d_s, -1)
        for band, block in blocks.items()
    }

    report = None
    for leaf in (leaves if leaves is not None else family.leaves):
        _check_inner_range(params.s, leaf.smoothness)
        leaf_report = _leaf_report(leaf, spectra, LeafRestrictor(leaf, spec), params, spec.n_max)
        report = leaf_report if report is None else report.merge(leaf_report)
    if report is None:
        raise ParameterRangeError("leaf family is empty")
    return report


def embedding_ratio(f: GridFunction, family: LeafFamily, params: NormParams, u: int = 1) -> float:
    """Anisotropic norm over a finite-difference C^u norm."""
    denominator = cu_norm(f, u)
    if denominator == 0.0:
        return 0.0
    return aniso_norm(f, family, params).value / denominator
