"""
Cone geometry, admissible graph leaves and restriction of grid functions to leaves.

Leaves are graphs over the stable chart. The chord condition is checked as an angle bound:
every chord must make an angle of at most (horizontal angle - aperture - margin) with the
horizontal subspace, which for graphs is a Lipschitz bound on gamma.
"""

import configparser
import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft

from anisolab.config import settings
from anisolab.exceptions import LeafValidationError, SpecMismatchError
from anisolab.schemas.grid import GridFunction, GridSpec
from anisolab.schemas.leaves import (
    AdmissibleLeaf,
    LeafFamily,
    LeafFamilyConfig,
    LeafFunction,
    UnstableCone,
)

logger = logging.getLogger(__name__)


# ===============================
# CONE
# ===============================
def vertical_axis(d_s: int, d_u: int) -> np.ndarray:
    axis = np.zeros((d_s + d_u, d_u))
    axis[d_s:, :] = np.eye(d_u)
    return axis


def make_cone(d_s: int, d_u: int, axis: Optional[np.ndarray] = None, theta: float = math.radians(30.0),
              margin: Optional[float] = None) -> UnstableCone:
    axis = vertical_axis(d_s, d_u) if axis is None else axis
    kwargs = {} if margin is None else {"margin": margin}
    return UnstableCone(d_s=d_s, d_u=d_u, axis=axis, aperture=theta, **kwargs)


def direction_angle(cone: UnstableCone, v) -> float:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    cosine = float(np.linalg.norm(cone.axis.T @ v)) / norm
    return math.acos(min(1.0, max(-1.0, cosine)))


def contains_direction(cone: UnstableCone, v) -> bool:
    """Closed-cone membership: angle(v, axis subspace) <= aperture."""
    return direction_angle(cone, v) <= cone.aperture + 1e-12


# ===============================
# LEAF VALIDATION
# ===============================
def chord_failures(leaf: AdmissibleLeaf, cone: UnstableCone, pairs: int, seed: int = 0) -> int:
    """Number of sampled chords steeper than the cone allows."""
    rng = np.random.default_rng([seed, leaf.leaf_id, 7919])
    half = leaf.box_length / 2
    z = rng.uniform(-half, half, size=(pairs, leaf.d_s))
    w = rng.uniform(-half, half, size=(pairs, leaf.d_s))
    dz = np.linalg.norm(z - w, axis=1)
    dg = np.linalg.norm(leaf.profile(z) - leaf.profile(w), axis=1)
    valid = dz > 0
    angles = np.arctan2(dg[valid], dz[valid])
    return int(np.sum(angles > cone.max_chord_angle + 1e-12))


def make_graph_leaf(family: str, coefficients: Sequence[float], cone: UnstableCone, C_F: float,
                    x0: Optional[Sequence[float]] = None, box_length: float = 2 * math.pi,
                    smoothness: Optional[float] = None, leaf_id: int = 0, representative: int = 0,
                    pairs: Optional[int] = None) -> AdmissibleLeaf:
    """Build and validate a leaf; the error names the violated condition."""
    d = cone.dim
    offset = tuple(float(x) for x in x0) if x0 is not None else tuple([0.0] * d)
    leaf = AdmissibleLeaf(
        leaf_id=leaf_id,
        representative=representative,
        kind=family,
        coefficients=tuple(float(c) for c in coefficients),
        d_s=cone.d_s,
        d_u=cone.d_u,
        box_length=box_length,
        offset=offset,
        smoothness=smoothness or settings.SMOOTHNESS_R,
        chart_bound=C_F,
    )

    chart_norm = leaf.chart_norm()
    if chart_norm > C_F:
        raise LeafValidationError(f"chart norm {chart_norm:.4g} exceeds C_F = {C_F:.4g}")
    if leaf.slope_bound() > cone.max_slope + 1e-12:
        raise LeafValidationError(
            f"chord transversality: slope {leaf.slope_bound():.4g} exceeds "
            f"tan({math.degrees(cone.max_chord_angle):.2f} deg) = {cone.max_slope:.4g}"
        )
    failures = chord_failures(leaf, cone, pairs or settings.CHORD_PAIRS)
    if failures:
        raise LeafValidationError(f"chord transversality: {failures} sampled chords inside the cone")
    if np.any(np.abs(leaf.shift_vector) > box_length / 2):
        raise LeafValidationError("leaf exits the padded box (offset too large)")
    return leaf


def horizontal_leaf(cone: UnstableCone, box_length: float, C_F: float = None) -> AdmissibleLeaf:
    return make_graph_leaf("horizontal", (), cone, C_F or settings.CHART_BOUND, box_length=box_length)


def sinusoidal_rejection_threshold(cone: UnstableCone, C_F: float, box_length: float, modes: Sequence[float],
                                   smoothness: Optional[float] = None, rel_tol: float = 1e-9,
                                   pairs: int = 2000) -> float:
    """Largest amplitude at which a sinusoidal leaf with these modes still validates, by bisection."""
    def accepted(amplitude: float) -> bool:
        try:
            make_graph_leaf("sinusoidal", (amplitude, 0.0) + tuple(modes), cone, C_F, box_length=box_length,
                            smoothness=smoothness, pairs=pairs)
        except LeafValidationError:
            return False
        return True

    w = 2 * math.pi * float(np.linalg.norm(modes)) / box_length
    low, high = 0.0, 2.0 * cone.max_slope / w
    while high - low > rel_tol * high:
        middle = (low + high) / 2
        if accepted(middle):
            low = middle
        else:
            high = middle
    return low


# ===============================
# FAMILY SAMPLING
# ===============================
def _draw_coefficients(kind: str, rng: np.random.Generator, cone: UnstableCone, spec: GridSpec,
                       config: LeafFamilyConfig) -> Tuple[float, ...]:
    fraction = rng.uniform(config.amplitude_low, config.amplitude_high)
    slope_cap = min(cone.max_slope, config.chart_bound)
    d_s, d_u, L = cone.d_s, cone.d_u, spec.box_length

    if kind == "affine":
        # integer slopes close the leaf on the box
        for _ in range(64):
            A = rng.integers(-1, 2, size=(d_u, d_s)).astype(np.float64)
            norm = np.linalg.norm(A, ord=2)
            if 0 < norm <= slope_cap:
                return tuple(A.ravel())
        logger.warning("no integer slope fits the cone; falling back to a real slope")
        A = np.zeros((d_u, d_s))
        A[0, 0] = fraction * slope_cap * rng.choice([-1.0, 1.0])
        return tuple(A.ravel())

    if kind == "sinusoidal":
        modes = np.zeros(d_s)
        while not np.any(modes):
            modes = rng.integers(-config.max_mode, config.max_mode + 1, size=d_s).astype(np.float64)
        w = 2 * math.pi * float(np.linalg.norm(modes)) / L
        orders = range(1, int(math.ceil(config.smoothness)) + 1)
        cap = min(cone.max_slope / w, min(config.chart_bound / w ** k for k in orders))
        amplitude = fraction * cap
        phase = rng.uniform(0.0, 2 * math.pi)
        return (amplitude, phase) + tuple(modes)

    if kind == "quadratic":
        corner = L / 2 * math.sqrt(d_s)
        curvature = fraction * min(slope_cap / (2 * corner), config.chart_bound / 2)
        curvature *= rng.choice([-1.0, 1.0])
        return (curvature,) + tuple([0.0] * d_s)

    raise ValueError(f"unknown leaf kind {kind}")


def _translation_offsets(rng: np.random.Generator, count: int, step: float, d: int) -> List[Tuple[float, ...]]:
    lattice = [np.array(m) for m in np.ndindex(*([5] * d))]
    lattice = [m - 2 for m in lattice if np.any(m - 2)]
    picks = rng.choice(len(lattice), size=count - 1, replace=len(lattice) < count - 1)
    offsets = [tuple([0.0] * d)]
    offsets.extend(tuple(float(x) for x in step * lattice[i]) for i in picks)
    return offsets


def sample_leaf_family(config: LeafFamilyConfig, seed: int, cone: UnstableCone, spec: GridSpec) -> LeafFamily:
    """Horizontal leaf plus ``translations`` copies of each drawn representative."""
    if spec.d_s != cone.d_s or spec.d_u != cone.d_u:
        raise SpecMismatchError("cone split does not match the grid split")
    rng = np.random.default_rng(seed)
    step = config.translation_step or spec.support_radius / 2
    d = spec.dim

    representatives = []
    for kind in ("affine", "sinusoidal", "quadratic"):
        for _ in range(getattr(config, kind)):
            representatives.append((kind, _draw_coefficients(kind, rng, cone, spec, config)))

    leaves: List[AdmissibleLeaf] = []
    if representatives:
        leaves.append(horizontal_leaf(cone, spec.box_length, config.chart_bound))
    else:
        representatives = [("horizontal", ())]

    for rep_index, (kind, coeffs) in enumerate(representatives, start=1):
        for offset in _translation_offsets(rng, config.translations, step, d):
            try:
                leaf = make_graph_leaf(
                    kind, coeffs, cone, config.chart_bound, x0=offset, box_length=spec.box_length,
                    smoothness=config.smoothness, leaf_id=len(leaves), representative=rep_index,
                )
            except LeafValidationError as e:
                logger.warning(f"Skipping {kind} candidate at offset {offset}: {e}")
                continue
            leaves.append(leaf)

    logger.info(f"Leaf family: {len(leaves)} leaves from {len(representatives)} representatives (seed {seed})")
    return LeafFamily(leaves=leaves, config=config, seed=seed, translation_step=step)


# ===============================
# RESTRICTION
# ===============================
def chart_points(spec: GridSpec) -> np.ndarray:
    axis = spec.axis_coordinates()
    grids = np.meshgrid(*([axis] * spec.d_s), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


class LeafRestrictor:
    """
    Trigonometric interpolation of grid functions onto one leaf.

    The chart lattice is the stable part of the ambient lattice, so each chart point only
    needs a d_u-dimensional interpolation along its fibre. The phase table is built once and
    reused for every band.
    """

    def __init__(self, leaf: AdmissibleLeaf, spec: GridSpec):
        if leaf.d_s != spec.d_s or leaf.d_u != spec.d_u:
            raise SpecMismatchError("leaf split does not match the grid split")
        if not math.isclose(leaf.box_length, spec.box_length, rel_tol=1e-12):
            raise SpecMismatchError("leaf was built for a different box")
        self.leaf = leaf
        self.spec = spec
        self.chart = spec.chart_spec()
        z = chart_points(spec)
        heights = leaf.graph(z)
        N = spec.points_per_axis
        xi = spec.axis_frequencies()
        # exp(i y xi_k) (-1)^k / N per unstable axis, combined into one table
        sign = 1.0 - 2.0 * (np.arange(N) % 2)
        phase = np.ones((z.shape[0], 1), dtype=np.complex128)
        for axis in range(spec.d_u):
            factor = np.exp(1j * heights[:, axis, None] * xi[None, :]) * sign[None, :] / N
            phase = (phase[:, :, None] * factor[:, None, :]).reshape(z.shape[0], -1)
        self.phase = phase
        self.weights = leaf.jacobian_weights(z).reshape(self.chart.shape)
        self.unstable_axes = tuple(range(spec.d_s, spec.dim))

    def unstable_spectrum(self, values: np.ndarray) -> np.ndarray:
        """Partial FFT along the unstable axes, flattened to (chart points, modes)."""
        partial = sfft.fftn(values, axes=self.unstable_axes)
        return partial.reshape(self.phase.shape[0], -1)

    def chart_values(self, values: np.ndarray = None, spectrum: np.ndarray = None) -> np.ndarray:
        if spectrum is None:
            spectrum = self.unstable_spectrum(values)
        samples = np.einsum("mk,mk->m", self.phase, spectrum)
        return samples.reshape(self.chart.shape)

    def __call__(self, f: GridFunction) -> LeafFunction:
        if not f.spec.same_lattice(self.spec):
            raise SpecMismatchError("function and leaf restrictor use different lattices")
        return LeafFunction(
            leaf_id=self.leaf.leaf_id,
            chart=self.chart,
            values=self.chart_values(f.values),
            weights=self.weights,
        )


def restrict_to_leaf(f: GridFunction, leaf: AdmissibleLeaf) -> LeafFunction:
    return LeafRestrictor(leaf, f.spec)(f)


# ===============================
# FAMILY FILE
# ===============================
def write_leaf_family(family: LeafFamily, path) -> Path:
    """
    Leaf family description file, one INI section per leaf:

        [family]
        seed = 7
        translation_step = 0.39
        translations = 8

        [leaf.3]
        kind = sinusoidal
        representative = 2
        coefficients = 0.21, 1.3, 1.0
        offset = 0.39, -0.78
    """
    parser = configparser.ConfigParser()
    parser["family"] = {
        "seed": str(family.seed),
        "translation_step": repr(family.translation_step),
        "translations": str(family.config.translations),
        "chart_bound": repr(family.config.chart_bound),
        "smoothness": repr(family.config.smoothness),
    }
    for leaf in family.leaves:
        parser[f"leaf.{leaf.leaf_id}"] = {
            "kind": leaf.kind,
            "representative": str(leaf.representative),
            "coefficients": ", ".join(repr(c) for c in leaf.coefficients),
            "offset": ", ".join(repr(x) for x in leaf.shift_vector),
        }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as handle:
        parser.write(handle)
    return path


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def read_leaf_family(path, cone: UnstableCone, spec: GridSpec) -> LeafFamily:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(f"leaf family file not found: {path}")
    head = parser["family"]
    config = LeafFamilyConfig(
        affine=0, sinusoidal=0, quadratic=0,
        translations=int(head.get("translations", "8")),
        chart_bound=float(head.get("chart_bound", str(settings.CHART_BOUND))),
        smoothness=float(head.get("smoothness", str(settings.SMOOTHNESS_R))),
    )
    leaves = []
    for name in parser.sections():
        if not name.startswith("leaf."):
            continue
        section = parser[name]
        leaves.append(make_graph_leaf(
            section["kind"], _floats(section.get("coefficients", "")), cone, config.chart_bound,
            x0=_floats(section["offset"]), box_length=spec.box_length, smoothness=config.smoothness,
            leaf_id=int(name.split(".", 1)[1]), representative=int(section["representative"]),
        ))
    return LeafFamily(leaves=leaves, config=config, seed=int(head["seed"]),
                      translation_step=float(head["translation_step"]))
