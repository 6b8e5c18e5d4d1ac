"""
Periodic-box spectral toolkit.

Conventions:
- forward transform F f(xi) = sum_j f(x_j) exp(-i x_j xi) (L/N)^d
- inverse transform f(x) = (2 pi)^(-d) sum_k F(xi_k) exp(i x xi_k) (2 pi / L)^d
- dyadic windows psi_0 = chi(|xi|), psi_n = chi(2^-n |xi|) - chi(2^(-n+1) |xi|)
- S_n is the Fourier multiplier with psi_n, S_-1 = 0, S^j = S_0 + ... + S_j

Multipliers never touch the centering phase or the cell measures: they cancel between
the forward and the inverse transform, so ``apply_multiplier`` runs on raw FFTs.
"""

import logging
from functools import lru_cache
from typing import Dict, List, Optional, Union

import numpy as np
from scipy import fft as sfft

from anisolab.exceptions import BandRangeError, SpecMismatchError
from anisolab.schemas.grid import GridFunction, GridSpec, SpectralWindow, SpectrumFunction

logger = logging.getLogger(__name__)

Symbol = Union[SpectralWindow, SpectrumFunction, np.ndarray]

# box enlargement and refinement of the kernel measurement lattice
MEASURE_ENLARGE = 8
MEASURE_OVERSAMPLE = 2


# ===============================
# BUMP AND WINDOWS
# ===============================
def _h(u: np.ndarray) -> np.ndarray:
    positive = u > 0
    safe = np.where(positive, u, 1.0)
    return np.where(positive, np.exp(-1.0 / safe), 0.0)


def chi(x):
    """Smooth monotone bump: 1 on [0, 1], 0 on [2, inf)."""
    x = np.asarray(x, dtype=np.float64)
    a = _h(2.0 - x)
    b = _h(x - 1.0)
    out = a / (a + b)
    if out.ndim == 0:
        return float(out)
    return out


def dyadic_symbol(n: int, radii: np.ndarray) -> np.ndarray:
    """psi_n evaluated at frequency magnitudes ``radii``; zero for n < 0."""
    radii = np.asarray(radii, dtype=np.float64)
    if n < 0:
        return np.zeros_like(radii)
    if n == 0:
        return chi(radii)
    values = chi(radii / 2.0 ** n) - chi(radii / 2.0 ** (n - 1))
    return np.clip(values, 0.0, 1.0)


def partial_sum_symbol(j: int, radii: np.ndarray) -> np.ndarray:
    """Sum of psi_0..psi_j, which telescopes to chi(2^-j |xi|)."""
    radii = np.asarray(radii, dtype=np.float64)
    if j < 0:
        return np.zeros_like(radii)
    return chi(radii / 2.0 ** j)


@lru_cache(maxsize=64)
def _frequency_radius(N: int, L: float, D: int) -> np.ndarray:
    axis = 2 * np.pi * np.fft.fftfreq(N, d=L / N)
    grids = np.meshgrid(*([axis] * D), indexing="ij")
    radius = np.sqrt(sum(g ** 2 for g in grids))
    radius.setflags(write=False)
    return radius


@lru_cache(maxsize=64)
def _centering_sign(N: int, D: int) -> np.ndarray:
    # exp(i pi k) for the centred lattice x_j = (j - N/2) h
    parity = np.indices((N,) * D).sum(axis=0) % 2
    sign = (1.0 - 2.0 * parity).astype(np.float64)
    sign.setflags(write=False)
    return sign


def frequency_radius(spec: GridSpec, D: Optional[int] = None) -> np.ndarray:
    return _frequency_radius(spec.points_per_axis, float(spec.box_length), D or spec.dim)


def _check_band(n: int, spec: GridSpec):
    if n < 0 or n > spec.n_max:
        raise BandRangeError(f"band {n} outside [0, {spec.n_max}] (guard below Nyquist)")


def make_dyadic_window(n: int, D: Optional[int], spec: GridSpec) -> SpectralWindow:
    _check_band(n, spec)
    D = D or spec.dim
    values = dyadic_symbol(n, frequency_radius(spec, D))
    return SpectralWindow(band=n, ambient_dim=D, spec=spec, values=values)


def partition_residual(spec: GridSpec, D: Optional[int] = None) -> float:
    """max |sum_n psi_n - 1| over lattice points with |xi| <= 2^n_max."""
    radius = frequency_radius(spec, D)
    total = np.zeros_like(radius)
    for n in range(spec.n_max + 1):
        total = total + dyadic_symbol(n, radius)
    inside = radius <= 2.0 ** spec.n_max
    return float(np.max(np.abs(total[inside] - 1.0)))


# ===============================
# TRANSFORMS
# ===============================
def dft_forward(f: GridFunction) -> SpectrumFunction:
    spec = f.spec
    coeffs = sfft.fftn(f.values) * spec.cell_volume * _centering_sign(spec.N, spec.dim)
    return SpectrumFunction(spec=spec, coeffs=coeffs)


def dft_inverse(F: SpectrumFunction, kind: str = "generic") -> GridFunction:
    spec = F.spec
    values = sfft.ifftn(F.coeffs * _centering_sign(spec.N, spec.dim)) / spec.cell_volume
    return GridFunction(spec=spec, values=values, kind=kind)


def check_same_spec(f: GridFunction, g: GridFunction):
    if not f.spec.same_lattice(g.spec):
        raise SpecMismatchError("operands live on different lattices")


def _symbol_array(a: Symbol, spec: GridSpec) -> np.ndarray:
    if isinstance(a, SpectralWindow):
        same = (
            a.ambient_dim == spec.dim
            and a.spec.points_per_axis == spec.points_per_axis
            and np.isclose(a.spec.box_length, spec.box_length, rtol=1e-14)
        )
        if not same:
            raise SpecMismatchError("window sampled on a different lattice")
        values = a.values
    elif isinstance(a, SpectrumFunction):
        if not a.spec.same_lattice(spec):
            raise SpecMismatchError("symbol sampled on a different lattice")
        values = a.coeffs
    else:
        values = np.asarray(a)
    if values.shape != spec.shape:
        raise SpecMismatchError(f"symbol shape {values.shape} does not match lattice {spec.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("symbol values must be finite")
    return values


def apply_multiplier(a: Symbol, f: GridFunction) -> GridFunction:
    """F^-1 (a . F f)."""
    symbol = _symbol_array(a, f.spec)
    values = sfft.ifftn(symbol * sfft.fftn(f.values))
    return f.with_values(values)


# ===============================
# LITTLEWOOD-PALEY BLOCKS
# ===============================
def lp_block(n: int, f: GridFunction) -> GridFunction:
    if n == -1:
        return f.with_values(np.zeros(f.spec.shape))
    _check_band(n, f.spec)
    return f.with_values(sfft.ifftn(dyadic_symbol(n, frequency_radius(f.spec)) * sfft.fftn(f.values)))


def lp_partial_sum(j: int, f: GridFunction) -> GridFunction:
    if j == -1:
        return f.with_values(np.zeros(f.spec.shape))
    _check_band(j, f.spec)
    return f.with_values(sfft.ifftn(partial_sum_symbol(j, frequency_radius(f.spec)) * sfft.fftn(f.values)))


def block_arrays(values: np.ndarray, spec: GridSpec, bands: range, D: Optional[int] = None) -> Dict[int, np.ndarray]:
    """Raw S_n arrays for every n in ``bands`` from a single forward FFT.

    Bands beyond n_max are allowed here (up to the Nyquist band); callers that expose
    them publicly validate the range themselves.
    """
    f_hat = sfft.fftn(values)
    radius = frequency_radius(spec, D)
    return {n: sfft.ifftn(dyadic_symbol(n, radius) * f_hat) for n in bands}


def band_decomposition(f: GridFunction) -> List[GridFunction]:
    arrays = block_arrays(f.values, f.spec, range(f.spec.n_max + 1))
    return [f.with_values(arrays[n]) for n in range(f.spec.n_max + 1)]


def shift(f: GridFunction, cells) -> GridFunction:
    """Cyclic lattice shift: result(x) = f(x - cells * h)."""
    cells = tuple(int(c) for c in np.atleast_1d(cells))
    if len(cells) != f.spec.dim:
        raise SpecMismatchError("shift needs one offset per axis")
    return f.with_values(np.roll(f.values, cells, axis=tuple(range(f.spec.dim))), supported=False)


# ===============================
# KERNEL DIAGNOSTICS
# ===============================
def window_kernel(n: int, spec: GridSpec, partial: bool = False) -> GridFunction:
    """F^-1 psi_n (or F^-1 of the partial sum up to n) on the lattice."""
    radius = frequency_radius(spec)
    symbol = partial_sum_symbol(n, radius) if partial else dyadic_symbol(n, radius)
    return dft_inverse(SpectrumFunction(spec=spec, coeffs=symbol), kind=f"kernel_{n}")


def measurement_lattice(spec: GridSpec, enlarge: int = MEASURE_ENLARGE, oversample: int = MEASURE_OVERSAMPLE) -> GridSpec:
    """Line lattice with an ``enlarge`` times wider box and an ``oversample`` times finer spacing.

    The windows are radial, so their kernels are measured in one dimension. Every band up to
    ``spec.n_max`` sits well inside its guard band, and the frequency step is fine enough
    for the lowest bands.
    """
    return GridSpec.create(
        1, 1, spec.N * enlarge * oversample, spec.box_length * enlarge, spec.support_radius * enlarge,
    )


def _l1_mass(f: GridFunction) -> float:
    return float(np.sum(np.abs(f.values)) * f.spec.cell_volume)


def kernel_l1_masses(spec: GridSpec, bands: Optional[range] = None) -> Dict[int, float]:
    bands = range(1, spec.n_max + 1) if bands is None else bands
    return {n: _l1_mass(window_kernel(n, spec)) for n in bands}


def partial_sum_l1_masses(spec: GridSpec, bands: Optional[range] = None) -> Dict[int, float]:
    bands = range(0, spec.n_max + 1) if bands is None else bands
    return {n: _l1_mass(window_kernel(n, spec, partial=True)) for n in bands}


def symbol_derivative_maxima(spec: GridSpec, axis: int = 0, bands: Optional[range] = None) -> Dict[int, float]:
    """Centered-difference maxima of d psi_n / d xi_axis, by default for n = 1..n_max."""
    radius = np.fft.fftshift(frequency_radius(spec))
    maxima = {}
    for n in range(1, spec.n_max + 1) if bands is None else bands:
        window = dyadic_symbol(n, radius)
        derivative = np.gradient(window, spec.frequency_step, axis=axis)
        maxima[n] = float(np.max(np.abs(derivative)))
    return maxima


def out_of_band_fraction(values: np.ndarray, spec: GridSpec, radius_limit: float, lower: float = 0.0) -> float:
    """Share of spectral energy outside lower <= |xi| <= radius_limit."""
    energy = np.abs(sfft.fftn(values)) ** 2
    total = float(energy.sum())
    if total == 0.0:
        return 0.0
    radius = frequency_radius(spec)
    outside = (radius > radius_limit * (1 + 1e-12)) | (radius < lower * (1 - 1e-12))
    return float(energy[outside].sum()) / total
