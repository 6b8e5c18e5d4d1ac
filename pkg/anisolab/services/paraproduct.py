"""
Paraproduct split, support facts, single-coordinate checks, the product-inequality probe,
the wave-packet kernel probe and the leafwise Young check.
"""

import itertools
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft

from anisolab.config import settings
from anisolab.exceptions import BandRangeError, ParameterRangeError
from anisolab.schemas.grid import GridFunction, GridSpec
from anisolab.schemas.leaves import AdmissibleLeaf, LeafFamily
from anisolab.schemas.norms import NormParams
from anisolab.schemas.reports import KernelProbe, ParaproductTerms, ProductProbe
from anisolab.services.aniso import aniso_norm, chart_profile, chart_profiles, leafwise_besov_norm
from anisolab.services.grid_spectral import (
    block_arrays,
    check_same_spec,
    dft_forward,
    dyadic_symbol,
    frequency_radius,
    out_of_band_fraction,
)
from anisolab.services.leaves import LeafRestrictor, chart_points
from anisolab.services.norms import besov_norm

logger = logging.getLogger(__name__)

# stable shifts per axis tried by translate_sup on leaves that do not close on the box
YOUNG_STABLE_SAMPLES = 16


# ===============================
# PARAPRODUCT
# ===============================
def _low_high(f_blocks: Dict[int, np.ndarray], g_blocks: Dict[int, np.ndarray], j_max: int, shape) -> np.ndarray:
    """sum_{k=2}^{j_max} S^{k-2} f . S_k g."""
    out = np.zeros(shape, dtype=np.complex128)
    low = np.zeros(shape, dtype=np.complex128)
    for k in range(2, j_max + 1):
        low = low + f_blocks[k - 2]
        out = out + low * g_blocks[k]
    return out


def _high_high(f_blocks: Dict[int, np.ndarray], g_blocks: Dict[int, np.ndarray], j_max: int, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=np.complex128)
    for k in range(0, j_max + 1):
        near = f_blocks.get(k - 1, 0) + f_blocks[k] + f_blocks[k + 1]
        out = out + near * g_blocks[k]
    return out


def paraproduct_split(f: GridFunction, g: GridFunction, j_max: Optional[int] = None) -> ParaproductTerms:
    check_same_spec(f, g)
    spec = f.spec
    j_max = spec.n_max if j_max is None else j_max
    if not 0 <= j_max <= spec.n_max:
        raise BandRangeError(f"j_max={j_max} outside [0, {spec.n_max}]")
    # one band past j_max feeds the S_{k+1} term of Pi2
    bands = range(0, j_max + 2)
    f_blocks = block_arrays(f.values, spec, bands)
    g_blocks = block_arrays(g.values, spec, bands)

    pi1 = _low_high(f_blocks, g_blocks, j_max, spec.shape)
    pi2 = _high_high(f_blocks, g_blocks, j_max, spec.shape)
    pi3 = _low_high(g_blocks, f_blocks, j_max, spec.shape)
    residual = float(np.max(np.abs(pi1 + pi2 + pi3 - f.values * g.values)))
    return ParaproductTerms(
        pi1=f.with_values(pi1, kind="pi1"),
        pi2=f.with_values(pi2, kind="pi2"),
        pi3=f.with_values(pi3, kind="pi3"),
        j_max=j_max,
        residual=residual,
    )


# ===============================
# SUPPORT FACTS
# ===============================
def support_region(term_kind: str, k: int, region: str = "exact") -> Tuple[float, float]:
    """Frequency shell that must carry the spectrum of the (f1) or (f2) product.

    "stated" uses the shells as usually written; "exact" uses the Minkowski sum of the
    window supports actually in use, which is what the contract is checked against.
    """
    if term_kind == "f1":
        if region == "stated":
            return 2.0 ** (k - 3), 2.0 ** (k + 1)
        return 0.0, 2.0 ** (k + 1) + 2.0 ** (k - 1)
    if term_kind == "f2":
        if region == "stated":
            return 0.0, 5 * 2.0 ** k
        return 0.0, 6 * 2.0 ** k
    raise ValueError(f"unknown term kind {term_kind!r}")


def support_check(term_kind: str, k: int, f: GridFunction, g: GridFunction, region: str = "exact") -> float:
    """Fraction of the product's spectral energy outside its support shell."""
    check_same_spec(f, g)
    spec = f.spec
    if term_kind == "f1" and k < 2:
        raise BandRangeError("(f1) needs k >= 2")
    if term_kind == "f2" and k < 0:
        raise BandRangeError("(f2) needs k >= 0")
    lower, upper = support_region(term_kind, k, region)
    if 2.0 ** (k + 1) > spec.guard_frequency * (1 + 1e-12) or upper > spec.nyquist_frequency:
        raise BandRangeError(f"support shell for k={k} exceeds the guard band")

    bands = range(0, k + 2)
    f_blocks = block_arrays(f.values, spec, bands)
    g_blocks = block_arrays(g.values, spec, bands)
    if term_kind == "f1":
        low = sum(f_blocks[j] for j in range(0, k - 1))
        product = low * g_blocks[k]
    else:
        near = f_blocks.get(k - 1, 0) + f_blocks[k] + f_blocks[k + 1]
        product = near * g_blocks[k]
    return out_of_band_fraction(product, spec, upper, lower)


# ===============================
# SINGLE COORDINATE
# ===============================
def coordinate_variation(values: np.ndarray) -> float:
    """Largest change of ``values`` along axes 1..d-1."""
    worst = 0.0
    for axis in range(1, values.ndim):
        reference = np.take(values, [0], axis=axis)
        worst = max(worst, float(np.max(np.abs(values - reference))))
    return worst


def single_coordinate_deviation(f: GridFunction) -> float:
    """max over bands of the variation of S_k f along x_2..x_d."""
    if f.spec.dim < 2:
        raise ValueError("single-coordinate deviation needs d >= 2")
    blocks = block_arrays(f.values, f.spec, range(f.spec.n_max + 1))
    return max(coordinate_variation(block) for block in blocks.values())


def first_axis_profile(g: GridFunction) -> GridFunction:
    """g(x_1) as a one-dimensional grid function."""
    index = (slice(None),) + (0,) * (g.spec.dim - 1)
    return GridFunction(spec=g.spec.line_spec(), values=g.values[index], kind=g.kind)


def product_inequality_ratio(f: GridFunction, g: GridFunction, s: float, p: float) -> ProductProbe:
    """||fg||_{B^s_p} / (||f||_{B^s_p} (||g||_{B^{1/p'}_{p'}(1D)} + ||g||_inf))."""
    check_same_spec(f, g)
    if not 1.0 < p < math.inf:
        raise ParameterRangeError(f"need 1 < p < inf, got {p}")
    if g.spec.dim >= 2:
        deviation = single_coordinate_deviation(g)
        if deviation > settings.SUPPORT_TOL * max(1.0, g.sup_norm()):
            raise ParameterRangeError(f"g depends on more than x_1 (deviation {deviation:.3e})")
    within = -1.0 + 1.0 / p < s < 0.0
    if not within:
        logger.warning(f"s={s}, p={p} outside the product-inequality range (-1+1/p, 0)")

    p_dual = p / (p - 1.0)
    product = f.with_values(f.values * g.values)
    numerator = besov_norm(product, s, p)
    denominator = besov_norm(f, s, p) * (besov_norm(first_axis_profile(g), 1.0 / p_dual, p_dual) + g.sup_norm())
    value = numerator / denominator if denominator > 0 else 0.0
    return ProductProbe(value=value, within_range=within, s=s, p=p, numerator=numerator, denominator=denominator)


# ===============================
# WAVE-PACKET KERNEL
# ===============================
def separation_constant(slope: float) -> int:
    """Band gap beyond which an affine leaf of this slope decouples exactly."""
    return 1 + int(math.ceil(0.5 * math.log2(1.0 + slope ** 2) - 1e-12))


def envelope(x: np.ndarray, k: int, d: int) -> np.ndarray:
    """b_k(x) = 2^(dk) b(2^k x), b = 1 on the unit ball and |x|^(-d-1) outside."""
    scaled = np.linalg.norm(np.atleast_2d(x), axis=-1) * 2.0 ** k
    profile = np.where(scaled <= 1.0, 1.0, np.maximum(scaled, 1.0) ** (-d - 1.0))
    return 2.0 ** (d * k) * profile


def probe_points(spec: GridSpec, per_axis: int = 8) -> np.ndarray:
    """Lattice indices of a coarse probe grid covering the support ball."""
    N = spec.points_per_axis
    reach = int(spec.support_radius / spec.spacing)
    picks = np.unique(np.linspace(N // 2 - reach, N // 2 + reach, per_axis).round().astype(int))
    grids = np.meshgrid(*([picks] * spec.dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _kernel_columns(k: int, leaf: AdmissibleLeaf, spec: GridSpec, points: np.ndarray,
                    restrictor: LeafRestrictor) -> Tuple[np.ndarray, np.ndarray]:
    """Chart restrictions of S_k delta_y for every probe point y, plus their sup norms."""
    delta = np.zeros(spec.shape, dtype=np.complex128)
    delta[(spec.N // 2,) * spec.dim] = 1.0 / spec.cell_volume
    base = block_arrays(delta, spec, [k])[k]
    scale = float(np.max(np.abs(base)))
    columns = []
    for index in points:
        shifted = np.roll(base, tuple(int(i) - spec.N // 2 for i in index), axis=tuple(range(spec.dim)))
        columns.append(restrictor.chart_values(shifted))
    return np.stack(columns, axis=-1), scale


def _chart_band(columns: np.ndarray, chart: GridSpec, k_s: int) -> np.ndarray:
    axes = tuple(range(chart.dim))
    symbol = dyadic_symbol(k_s, frequency_radius(chart))[..., None]
    return sfft.ifftn(symbol * sfft.fftn(columns, axes=axes), axes=axes)


def kernel_decay_profile(k: int, leaf: AdmissibleLeaf, spec: GridSpec, k_s_values: Sequence[int],
                         per_axis: int = 8) -> List[Tuple[int, float]]:
    """max |V| normalized by ||S_k delta||_inf for each inner band."""
    restrictor = LeafRestrictor(leaf, spec)
    columns, scale = _kernel_columns(k, leaf, spec, probe_points(spec, per_axis), restrictor)
    return [(k_s, float(np.max(np.abs(_chart_band(columns, restrictor.chart, k_s)))) / scale) for k_s in k_s_values]


def fit_decay_exponent(profile: Sequence[Tuple[int, float]], floor: Optional[float] = None) -> float:
    """Minus the least-squares slope of log2 max|V| against k_s; inf when the kernel vanishes."""
    floor = settings.KERNEL_FLOOR if floor is None else floor
    usable = [(k_s, value) for k_s, value in profile if value > floor]
    if len(usable) < 2:
        return math.inf
    bands = np.array([k_s for k_s, _ in usable], dtype=np.float64)
    logs = np.log2([value for _, value in usable])
    slope = np.polyfit(bands, logs, 1)[0]
    return float(-slope)


def kernel_status(max_abs: float, decay_exponent: float, smoothness: float) -> str:
    """separated when the kernel vanishes numerically, decaying when it falls off like 2^(-k_s (r - 1/2))."""
    if max_abs <= settings.KERNEL_ZERO_TOL:
        return "separated"
    if decay_exponent >= smoothness - 0.5:
        return "decaying"
    return "coupled"


def calibrate_separation(leaves: Sequence[AdmissibleLeaf], k: int, spec: GridSpec, per_axis: int = 4) -> int:
    """Smallest band gap at which every affine leaf gives a numerically zero kernel."""
    affine = [leaf for leaf in leaves if leaf.kind in ("horizontal", "affine") and leaf.closes_on_box]
    if not affine:
        return separation_constant(max((leaf.slope_bound() for leaf in leaves), default=0.0))
    worst = 0
    for leaf in affine:
        profile = kernel_decay_profile(k, leaf, spec, range(k + 1, spec.n_max + 1), per_axis)
        gap = 0
        for k_s, value in profile:
            if value > settings.KERNEL_ZERO_TOL:
                gap = k_s - k
        worst = max(worst, gap)
    return worst


def wave_packet_kernel(k: int, k_s: int, leaf: AdmissibleLeaf, spec: GridSpec, separation: Optional[int] = None,
                       per_axis: int = 8) -> KernelProbe:
    """Kernel of phi -> S~_{k_s}((S_k phi) o pi_Gamma^-1) on probe columns, with its k_s decay fit."""
    separation = separation_constant(leaf.slope_bound()) if separation is None else separation
    if k_s <= k + separation:
        raise BandRangeError(f"band separation insufficient: k_s={k_s} <= k + C0 = {k + separation}")
    if k_s > spec.n_max or k < 0:
        raise BandRangeError(f"bands (k={k}, k_s={k_s}) must lie in [0, {spec.n_max}]")

    restrictor = LeafRestrictor(leaf, spec)
    points = probe_points(spec, per_axis)
    columns, scale = _kernel_columns(k, leaf, spec, points, restrictor)
    sweep = range(k + separation + 1, spec.n_max + 1)
    profile = [(band, float(np.max(np.abs(_chart_band(columns, restrictor.chart, band)))) / scale) for band in sweep]
    kernel = _chart_band(columns, restrictor.chart, k_s) / scale

    # envelope constant: sup |V| / b_k(pi_Gamma^-1(x) - y) on the probe
    z = chart_points(spec)
    leaf_points = np.concatenate([z, leaf.graph(z)], axis=1)
    coords = spec.axis_coordinates()
    ambient = coords[points]
    gaps = leaf_points[:, None, :] - ambient[None, :, :]
    gaps = np.mod(gaps + spec.box_length / 2, spec.box_length) - spec.box_length / 2
    bound = envelope(gaps.reshape(-1, spec.dim), k, spec.dim).reshape(gaps.shape[:2])
    magnitude = np.abs(kernel).reshape(bound.shape) * scale
    envelope_constant = float(np.max(magnitude / bound))

    max_abs = float(np.max(np.abs(kernel)))
    decay_exponent = fit_decay_exponent(profile)
    return KernelProbe(
        k=k, k_s=k_s, leaf_id=leaf.leaf_id, leaf_kind=leaf.kind, separation=separation,
        status=kernel_status(max_abs, decay_exponent, leaf.smoothness),
        kernel=kernel, probe_points=points, max_abs=max_abs,
        decay_profile=profile, decay_exponent=decay_exponent,
        envelope_constant=envelope_constant,
    )


# ===============================
# LEAFWISE YOUNG
# ===============================
def _stable_offsets(restrictor: LeafRestrictor, samples: int) -> List[Tuple[int, ...]]:
    """Stable lattice shifts to try; none are needed when a stable shift only moves f along the leaf."""
    leaf, spec = restrictor.leaf, restrictor.spec
    if leaf.kind == "horizontal" or (leaf.kind == "affine" and leaf.closes_on_box):
        return [(0,) * spec.d_s]
    stride = max(1, spec.N // samples)
    return list(itertools.product(range(0, spec.N, stride), repeat=spec.d_s))


def translate_sup(f: GridFunction, restrictor: LeafRestrictor, s: float, p: float,
                  stable_samples: int = YOUNG_STABLE_SAMPLES) -> float:
    """max over lattice translates f(. - a) of the leafwise norm on the restrictor's leaf.

    Every unstable shift comes out of one FFT of the interpolation sums. Stable shifts are
    sampled with stride N / stable_samples unless the leaf makes them redundant.
    """
    spec = restrictor.spec
    stable_axes = tuple(range(spec.d_s))
    fibre_axes = tuple(range(1, spec.d_u + 1))
    best = 0.0
    for offset in _stable_offsets(restrictor, stable_samples):
        rolled = np.roll(f.values, offset, axis=stable_axes) if any(offset) else f.values
        fibres = (restrictor.phase * restrictor.unstable_spectrum(rolled)).reshape((-1,) + (spec.N,) * spec.d_u)
        sheets = sfft.fftn(fibres, axes=fibre_axes).reshape(restrictor.chart.shape + (-1,))
        best = max(best, float(np.max(chart_profiles(sheets, restrictor, s, p))))
    return best


def leafwise_young_check(kernel_envelope: GridFunction, f: GridFunction, leaf_family: LeafFamily,
                         s: float, p: float) -> float:
    """max over leaves of ||kernel * f||_Gamma / (||kernel||_1 sup over translates a of ||f(. - a)||_Gamma)."""
    check_same_spec(kernel_envelope, f)
    spec = f.spec
    mass = float(np.sum(np.abs(kernel_envelope.values)) * spec.cell_volume)
    if mass == 0.0:
        return 0.0
    convolved = f.with_values(sfft.ifftn(
        dft_forward(kernel_envelope).coeffs * sfft.fftn(f.values)
    ))

    worst = 0.0
    for leaf in leaf_family.leaves:
        restrictor = LeafRestrictor(leaf, spec)
        reference = translate_sup(f, restrictor, s, p)
        if reference == 0.0:
            continue
        numerator = leafwise_besov_norm(convolved, leaf, s, p, restrictor)
        worst = max(worst, numerator / (mass * reference))
    return worst


# ===============================
# INDICATOR DIAGNOSTICS
# ===============================
def indicator_leaf_profile(indicator: GridFunction, family: LeafFamily, p: float) -> Dict[int, float]:
    """For each k >= 2: max over leaves of the leafwise B^{1/p'}_{p',inf} norm of S^{k-2} 1_Lambda."""
    spec = indicator.spec
    p_dual = p / (p - 1.0)
    blocks = block_arrays(indicator.values, spec, range(spec.n_max + 1))
    restrictors = [LeafRestrictor(leaf, spec) for leaf in family.leaves]
    profile = {}
    partial = np.zeros(spec.shape, dtype=np.complex128)
    for k in range(2, spec.n_max + 2):
        partial = partial + blocks[k - 2]
        best = 0.0
        for restrictor in restrictors:
            values = restrictor.chart_values(partial)
            value, _, _ = chart_profile(values, restrictor.weights, restrictor, 1.0 / p_dual, p_dual)
            best = max(best, value)
        profile[k] = best
    return profile


def multiplier_terms(indicator: GridFunction, f: GridFunction, family: LeafFamily,
                     params: NormParams) -> Dict[str, float]:
    """Anisotropic norms of Pi1, Pi2, Pi3 of (indicator, f), each relative to the norm of f."""
    reference = aniso_norm(f, family, params).value
    terms = paraproduct_split(indicator, f)
    ratios = {}
    for name, term in (("pi1", terms.pi1), ("pi2", terms.pi2), ("pi3", terms.pi3)):
        value = aniso_norm(term, family, params, check_supported=False).value
        ratios[name] = value / reference if reference > 0 else 0.0
    ratios["residual"] = terms.residual
    return ratios
