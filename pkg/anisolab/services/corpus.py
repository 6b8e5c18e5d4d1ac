"""
Indicators of half-spaces and strips, and the deterministic test-function corpus.

Corpus members are defined analytically in physical coordinates, so the same seed yields
the same functions at every resolution of a sweep.
"""

import itertools
import logging
import math
from typing import List, Optional

import numpy as np

from anisolab.exceptions import ParameterRangeError
from anisolab.schemas.experiment import CorpusSpec, IndicatorSpec
from anisolab.schemas.grid import GridFunction, GridSpec
from anisolab.schemas.leaves import UnstableCone
from anisolab.services.grid_spectral import _h
from anisolab.services.leaves import contains_direction

logger = logging.getLogger(__name__)

# gaussian tails fall below this at the support radius
_TAIL = 1e-13


# ===============================
# INDICATORS
# ===============================
def smooth_step(sigma: np.ndarray, epsilon: float) -> np.ndarray:
    """Sharp step (1 for sigma > 0) or its smooth version rising over [-eps/2, eps/2]."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if epsilon == 0.0:
        return (sigma > 0).astype(np.float64)
    a = _h(sigma / epsilon + 0.5)
    b = _h(0.5 - sigma / epsilon)
    return a / (a + b)


def make_indicator(spec: IndicatorSpec, grid: GridSpec) -> GridFunction:
    if spec.dim != grid.dim:
        raise ParameterRangeError(f"indicator normal has {spec.dim} entries, lattice is {grid.dim}-dimensional")
    half = grid.box_length / 2
    upper = spec.offset + (spec.width or 0.0)
    if abs(spec.offset) > half or (spec.shape == "strip" and upper > half):
        raise ParameterRangeError(f"strip [{spec.offset}, {upper}] exceeds the box [-{half}, {half}]")

    coords = grid.coordinates()
    sigma = sum(u * x for u, x in zip(spec.normal, coords)) - spec.offset
    values = smooth_step(sigma, spec.epsilon)
    if spec.shape == "strip":
        values = values * smooth_step(spec.width - sigma, spec.epsilon)
    return GridFunction(spec=grid, values=values, kind=spec.shape)


def is_transversal(spec: IndicatorSpec, cone: UnstableCone) -> bool:
    """True when the normal lies outside the closed cone."""
    return not contains_direction(cone, spec.normal)


# ===============================
# CORPUS
# ===============================
def _gaussian(grid: GridSpec, center: np.ndarray) -> np.ndarray:
    sigma = (grid.support_radius - float(np.linalg.norm(center))) / math.sqrt(2 * math.log(1 / _TAIL))
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coordinates(), center))
    return np.exp(-r2 / (2 * sigma ** 2))


def _smooth_bump(grid: GridSpec, center: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - |x-c|^2/rho^2)) inside rho = K - |c|, zero outside; equals 1 at the centre."""
    rho = grid.support_radius - float(np.linalg.norm(center))
    return _bump_profile(sum((x - c) ** 2 for x, c in zip(grid.coordinates(), center)) / rho ** 2)


def _bump_profile(u: np.ndarray) -> np.ndarray:
    inside = u < 1.0
    return np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - u, 1.0)), 0.0)


def _center(rng: np.random.Generator, grid: GridSpec, centered: bool = False,
            boundary: Optional[IndicatorSpec] = None) -> np.ndarray:
    """Random centre in the inner quarter of the ball, projected onto the boundary plane when one is given."""
    if centered:
        center = np.zeros(grid.dim)
    else:
        center = rng.uniform(-grid.support_radius / 4, grid.support_radius / 4, size=grid.dim)
    if boundary is not None:
        normal = np.asarray(boundary.normal)
        center = center - (center @ normal - boundary.offset) * normal
    return center


def _phase(grid: GridSpec, frequency: np.ndarray) -> np.ndarray:
    return np.exp(1j * sum(w * x for w, x in zip(frequency, grid.coordinates())))


def _direction(grid: GridSpec, cone: Optional[UnstableCone], aligned: bool) -> np.ndarray:
    if grid.dim == 1 or cone is None:
        return np.ones(1) if grid.dim == 1 else np.eye(grid.dim)[0 if not aligned else -1]
    if aligned:
        return cone.axis[:, 0]
    # first coordinate direction orthogonal to the axis frame
    projector = np.eye(grid.dim) - cone.axis @ cone.axis.T
    column = projector[:, int(np.argmax(np.linalg.norm(projector, axis=0)))]
    return column / np.linalg.norm(column)


def _lattice_frequencies(grid: GridSpec, band_limit: float) -> np.ndarray:
    """Frequency lattice points with |xi| <= band_limit in an order that ignores N."""
    reach = int(math.floor(band_limit * grid.box_length / (2 * math.pi)))
    points = [
        np.array(m) for m in itertools.product(range(-reach, reach + 1), repeat=grid.dim)
        if np.linalg.norm(m) * grid.frequency_step <= band_limit * (1 + 1e-12)
    ]
    return np.array(points, dtype=np.float64) * grid.frequency_step


def make_member(kind: str, grid: GridSpec, rng: np.random.Generator, cone: Optional[UnstableCone] = None,
                band_limit: float = 8.0, centered: bool = False,
                boundary: Optional[IndicatorSpec] = None) -> GridFunction:
    """One corpus member; localized kinds are centred on ``boundary`` when it is given."""
    if kind == "gaussian":
        values = _gaussian(grid, _center(rng, grid, centered, boundary))
    elif kind == "smooth_bump":
        values = _smooth_bump(grid, _center(rng, grid, centered, boundary))
    elif kind in ("wave_packet_aligned", "wave_packet_transverse"):
        direction = _direction(grid, cone, aligned=kind == "wave_packet_aligned")
        omega = rng.uniform(4.0, 8.0)
        values = _gaussian(grid, _center(rng, grid, centered, boundary)) * _phase(grid, omega * direction)
    elif kind == "plane_wave_mix":
        weights = rng.normal(size=3)
        weights = weights / np.sum(np.abs(weights))
        values = np.zeros(grid.shape, dtype=np.complex128)
        for weight in weights:
            frequency = rng.integers(-4, 5, size=grid.dim) * grid.frequency_step
            values = values + weight * _phase(grid, frequency)
        values = values * _gaussian(grid, _center(rng, grid, True, boundary))
    elif kind == "x1_profile":
        # depends on x1 only, so it is not localized in the other coordinates
        center = _center(rng, grid, centered, boundary)
        rho = grid.support_radius - abs(center[0])
        values = _bump_profile((grid.coordinates()[0] - center[0]) ** 2 / rho ** 2)
        return GridFunction(spec=grid, values=values, kind=kind)
    elif kind == "band_limited":
        frequencies = _lattice_frequencies(grid, band_limit)
        if band_limit >= grid.guard_frequency:
            raise ParameterRangeError(f"band limit {band_limit} reaches the guard band {grid.guard_frequency}")
        coefficients = rng.normal(size=len(frequencies)) + 1j * rng.normal(size=len(frequencies))
        coefficients = coefficients / np.linalg.norm(coefficients)
        values = np.zeros(grid.shape, dtype=np.complex128)
        for c, frequency in zip(coefficients, frequencies):
            values = values + c * _phase(grid, frequency)
        return GridFunction(spec=grid, values=values, kind=kind)
    else:
        raise ValueError(f"unknown corpus kind {kind!r}")
    return GridFunction(spec=grid, values=values, kind=kind, supported=True)


def make_corpus(spec: CorpusSpec, grid: GridSpec, cone: Optional[UnstableCone] = None) -> List[GridFunction]:
    """``count`` members of every kind; member m of kind k draws from default_rng([seed, k, m]).

    Member 0 of every localized kind sits at the origin, or at the foot of the origin on the
    boundary plane when ``spec.boundary`` is set.
    """
    boundary = spec.boundary
    if boundary is not None:
        if boundary.dim != grid.dim:
            raise ParameterRangeError(f"boundary normal has {boundary.dim} entries, lattice is {grid.dim}-dimensional")
        if abs(boundary.offset) >= grid.support_radius / 2:
            raise ParameterRangeError(
                f"boundary offset {boundary.offset} leaves no room for members inside K/2 = {grid.support_radius / 2}"
            )
    corpus = []
    for kind_index, kind in enumerate(spec.kinds):
        for member in range(spec.count):
            rng = np.random.default_rng([spec.seed, kind_index, member])
            corpus.append(make_member(kind, grid, rng, cone, spec.band_limit, centered=member == 0, boundary=boundary))
    logger.info(f"Corpus: {len(corpus)} members of kinds {', '.join(spec.kinds)} at N={grid.N}")
    return corpus
