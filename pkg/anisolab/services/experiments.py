"""
Experiment runner: config loading, resolution sweeps over a worker pool, verdicts and output.

A sweep is split into cells (one resolution times one parameter block). Cells are pure
functions of the config, so they run in any order on any worker; records are sorted
before anything is written.
"""

import configparser
import logging
import math
from collections import defaultdict
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from anisolab.config import settings
from anisolab.exceptions import ConfigError, ParameterRangeError
from anisolab.schemas.experiment import UNSUPPORTED_KINDS, ExperimentConfig, ResultRecord
from anisolab.schemas.grid import GridSpec
from anisolab.schemas.leaves import LeafFamily, UnstableCone
from anisolab.schemas.norms import NormParams
from anisolab.services.aniso import aniso_norm
from anisolab.services.corpus import is_transversal, make_corpus, make_indicator
from anisolab.services.leaves import make_cone, read_leaf_family, sample_leaf_family, write_leaf_family
from anisolab.services.lemmas import L1_DRIFT_LIMIT, LemmaContext, lemma_records
from anisolab.services.grid_spectral import block_arrays
from anisolab.services.norms import sobolev_norm, weighted_lp
from anisolab.services.paraproduct import (
    calibrate_separation,
    multiplier_terms,
    separation_constant,
    wave_packet_kernel,
)
from anisolab.utils.io import (
    series_label,
    write_grid_function,
    write_gnuplot_script,
    write_json,
    write_results_csv,
    write_results_json,
)

logger = logging.getLogger(__name__)

SECTIONS = ("grid", "norm", "cone", "leaves", "indicator", "corpus", "sweep")

# sections filled in before the file is read, per experiment
KIND_DEFAULTS = {
    "strichartz": {"grid": {"dim": "1"}, "sweep": {"resolutions": "128, 256, 512, 1024"}},
    "multiplier": {},
    "lemmas": {"sweep": {"resolutions": "64, 128, 256"}},
    "kernel-decay": {"sweep": {"resolutions": "128, 256, 512"}},
    "corpus": {"sweep": {"resolutions": "64, 128, 256"}},
}


# ===============================
# VERDICTS
# ===============================
def classify_boundedness(series: Sequence[Tuple[float, float]], bounded_slope: Optional[float] = None,
                         divergent_slope: Optional[float] = None) -> Tuple[float, str]:
    """Least-squares slope of log2 value against log2 N, and the verdict it implies."""
    bounded_slope = settings.BOUNDED_SLOPE if bounded_slope is None else bounded_slope
    divergent_slope = settings.DIVERGENT_SLOPE if divergent_slope is None else divergent_slope
    if len(series) < 3:
        raise ParameterRangeError(f"slope fitting needs at least 3 resolutions, got {len(series)}")
    sizes = np.array([n for n, _ in series], dtype=np.float64)
    values = np.array([v for _, v in series], dtype=np.float64)
    if np.any(values <= 0) or np.any(sizes <= 0):
        raise ParameterRangeError("slope fitting needs positive values")
    slope = float(np.polyfit(np.log2(sizes), np.log2(values), 1)[0])
    if slope < bounded_slope:
        return slope, "bounded"
    if slope > divergent_slope:
        return slope, "divergent"
    return slope, "inconclusive"


def strichartz_interval(p: float) -> Tuple[float, float]:
    """Open range of t for which 1_Lambda multiplies H^t_p boundedly."""
    return -1.0 + 1.0 / p, 1.0 / p


# ===============================
# CONFIG
# ===============================
def load_config(path: Optional[str], kind: str, **overrides) -> ExperimentConfig:
    """Read an INI experiment file; any unknown section or key is a ConfigError."""
    parser = configparser.ConfigParser()
    for section, values in KIND_DEFAULTS.get(kind, {}).items():
        parser[section] = values
    if path is not None:
        try:
            if not parser.read(path):
                raise ConfigError(f"config file not found: {path}")
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {path}: {e}")
    unknown = [name for name in parser.sections() if name not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(unknown)}")

    data = {name: dict(parser[name]) for name in parser.sections()}
    data.update({key: value for key, value in overrides.items() if value is not None})
    try:
        config = ExperimentConfig(kind=kind, **data)
    except ValidationError as e:
        raise ConfigError(str(e))
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig):
    if config.kind == "multiplier":
        if config.grid.dim < 2:
            raise ConfigError("the multiplier scan needs d >= 2")
        for params in config.norm.params():
            if not params.norm_admissible:
                raise ConfigError(f"inadmissible parameters: need t-(r-1) < s < -t < 0, got {params.label()}")
        unsupported = [kind for kind in config.corpus.kinds if kind in UNSUPPORTED_KINDS]
        if unsupported:
            raise ConfigError(f"{', '.join(unsupported)} members are not supported in K and cannot enter the multiplier scan")
    if config.kind in ("kernel-decay",) and config.grid.dim < 2:
        raise ConfigError("kernel probes need d >= 2")
    for N in config.sweep.resolutions:
        try:
            grid_spec(config, N)
        except ValidationError as e:
            raise ConfigError(f"resolution N={N} is not usable: {e}")


def grid_spec(config: ExperimentConfig, N: int) -> GridSpec:
    grid = config.grid
    return GridSpec.create(grid.dim, grid.d_s, N, grid.box_length, grid.support_radius)


def build_cone(config: ExperimentConfig) -> Optional[UnstableCone]:
    grid = config.grid
    if grid.dim < 2:
        return None
    d_u = grid.dim - grid.d_s
    axis = None
    try:
        if config.cone.axis is not None:
            axis = np.asarray(config.cone.axis, dtype=np.float64).reshape(grid.dim, d_u)
        return make_cone(grid.d_s, d_u, axis=axis, theta=math.radians(config.cone.theta_deg),
                         margin=math.radians(config.cone.margin_deg))
    except ValueError as e:
        raise ConfigError(f"invalid cone: {e}")


def build_family(config: ExperimentConfig, spec: GridSpec, cone: UnstableCone) -> LeafFamily:
    if config.leaves.family_file:
        return read_leaf_family(config.leaves.family_file, cone, spec)
    return sample_leaf_family(config.leaves, config.seed, cone, spec)


# ===============================
# CELLS
# ===============================
def _record(config: ExperimentConfig, **fields) -> ResultRecord:
    return ResultRecord(experiment=config.kind, seed=config.seed, **fields)


def strichartz_cell(config: ExperimentConfig, N: int, p: float, epsilon_cells: float) -> List[ResultRecord]:
    """Sobolev and finest-band ratios for every t at one (N, p, epsilon); t < 0 is measured through the adjoint.

    The finest-band ratio 2^(n_max t) ||S_n_max(1_Lambda phi)||_p / ||phi||_{H^t_p} scales like
    N^(t - 1/p) once the jump dominates the top band, so it separates bounded from divergent
    points at resolutions where the full Sobolev ratio is still converging.
    """
    spec = grid_spec(config, N)
    indicator_spec = config.indicator.build(spec.dim, spec.spacing, spec.support_radius, epsilon_cells)
    indicator = make_indicator(indicator_spec, spec)
    corpus = make_corpus(config.corpus_spec(indicator_spec if config.corpus.on_boundary else None), spec)
    products = [indicator.values * phi.values for phi in corpus]
    top = spec.n_max
    finest = [block_arrays(values, spec, [top])[top] for values in products]
    records = []
    for t in config.norm.t_values():
        # multiplication is self-adjoint: its norm on H^t_p equals its norm on H^-t_p'
        dual = t < 0
        q, order = (p / (p - 1.0), -t) if dual else (p, t)
        best = 0.0
        best_band = 0.0
        for phi, values, block in zip(corpus, products, finest):
            denominator = sobolev_norm(phi, order, q)
            if denominator == 0.0:
                continue
            best = max(best, sobolev_norm(phi.with_values(values), order, q) / denominator)
            band = 2.0 ** (top * order) * weighted_lp(block, spec.cell_volume, q) / denominator
            best_band = max(best_band, band)
        prefix = "dual_" if dual else ""
        common = dict(p=p, t=t, N=N, u_lambda=indicator_spec.label())
        for name, value in (("sobolev_ratio", best), ("finest_band_ratio", best_band)):
            records.append(_record(
                config, quantity=f"{prefix}{name}_eps{epsilon_cells:g}", value=value,
                verdict="degenerate" if value == 0.0 else "observed", **common,
            ))
    return records


def multiplier_cell(config: ExperimentConfig, N: int, index: int, epsilon_cells: float) -> List[ResultRecord]:
    """max over the corpus of aniso(1_Lambda phi) / aniso(phi) at one (N, parameter point, epsilon)."""
    spec = grid_spec(config, N)
    params = config.norm.params()[index]
    cone = build_cone(config)
    family = build_family(config, spec, cone)
    indicator_spec = config.indicator.build(spec.dim, spec.spacing, spec.support_radius, epsilon_cells)
    indicator = make_indicator(indicator_spec, spec)
    boundary = indicator_spec if config.corpus.on_boundary else None
    corpus = make_corpus(config.corpus_spec(boundary), spec, cone)
    common = dict(
        p=params.p, s=params.s, t=params.t, r=params.r, N=N, cone_theta=config.cone.theta_deg,
        u_lambda=indicator_spec.label(),
    )

    best = 0.0
    diagnostics: Dict[str, float] = defaultdict(float)
    for phi in corpus:
        reference = aniso_norm(phi, family, params).value
        if reference == 0.0:
            logger.warning(f"Degenerate corpus member ({phi.kind}) at N={N}")
            continue
        product = phi.with_values(indicator.values * phi.values)
        best = max(best, aniso_norm(product, family, params).value / reference)
        if config.sweep.diagnostics:
            for name, value in multiplier_terms(indicator, phi, family, params).items():
                diagnostics[name] = max(diagnostics[name], value)

    suffix = f"_eps{epsilon_cells:g}"
    records = [_record(config, quantity="multiplier_ratio" + suffix, value=best,
                       verdict="degenerate" if best == 0.0 else "observed", **common)]
    for name, value in sorted(diagnostics.items()):
        records.append(_record(config, quantity=f"{name}_ratio{suffix}", value=value, verdict="observed", **common))
    logger.info(f"multiplier cell N={N} {params.label()} eps={epsilon_cells:g}: ratio {best:.6g}")
    return records


def lemma_cell(config: ExperimentConfig, N: int) -> List[ResultRecord]:
    spec = grid_spec(config, N)
    family = None
    if spec.dim >= 2:
        family = build_family(config, spec, build_cone(config))
    classify = lambda series: classify_boundedness(series, config.sweep.bounded_slope, config.sweep.divergent_slope)
    return lemma_records(LemmaContext(config, spec, family), classify)


def kernel_decay_cell(config: ExperimentConfig, N: int) -> List[ResultRecord]:
    """Kernel maxima and decay exponents for the untranslated member of every representative."""
    spec = grid_spec(config, N)
    cone = build_cone(config)
    family = build_family(config, spec, cone)
    k = config.sweep.kernel_band
    representatives = {}
    for leaf in family.leaves:
        representatives.setdefault(leaf.representative, leaf)

    closed_affine = [leaf for leaf in representatives.values() if leaf.kind in ("horizontal", "affine")]
    calibrated = calibrate_separation(closed_affine, k, spec) if closed_affine else None
    records = []
    if calibrated is not None:
        records.append(_record(config, N=N, cone_theta=config.cone.theta_deg, quantity="calibrated_separation",
                               value=float(calibrated), verdict="observed"))

    for leaf in representatives.values():
        common = dict(N=N, r=leaf.smoothness, cone_theta=config.cone.theta_deg, u_lambda=f"leaf{leaf.leaf_id}")
        separation = separation_constant(leaf.slope_bound())
        if spec.n_max <= k + separation:
            logger.warning(f"{leaf.kind} leaf {leaf.leaf_id} stays coupled up to n_max={spec.n_max} at N={N}")
            records.append(_record(config, quantity=f"coupled_{leaf.kind}", value=float(separation),
                                   verdict="observed", **common))
            continue
        probe = wave_packet_kernel(k, spec.n_max, leaf, spec, separation)
        exact = leaf.kind in ("horizontal", "affine") and leaf.closes_on_box
        records.append(_record(
            config, quantity=f"kernel_max_{leaf.kind}", value=probe.max_abs,
            verdict=("pass" if probe.max_abs <= settings.KERNEL_ZERO_TOL else "fail") if exact else "observed",
            **common,
        ))
        if leaf.kind == "sinusoidal":
            verdict = "pass" if probe.decay_exponent >= leaf.smoothness - 0.5 else "fail"
        else:
            verdict = "observed"
        records.append(_record(config, quantity=f"decay_exponent_{leaf.kind}", value=probe.decay_exponent,
                               verdict=verdict, **common))
        records.append(_record(config, quantity=f"envelope_constant_{leaf.kind}",
                               value=probe.envelope_constant, verdict="observed", **common))
    return records


def _run_cell(task) -> List[ResultRecord]:
    config, name, args = task
    handlers = {
        "strichartz": strichartz_cell,
        "multiplier": multiplier_cell,
        "lemmas": lemma_cell,
        "kernel-decay": kernel_decay_cell,
    }
    return handlers[name](config, *args)


# ===============================
# RUNNER
# ===============================
class ExperimentRunner:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.violations: List[str] = []

    def _cells(self) -> List[Tuple]:
        config = self.config
        resolutions = config.sweep.resolutions
        epsilons = config.indicator.epsilon_cells
        if config.kind == "strichartz":
            return [(N, p, eps) for N in resolutions for p in config.norm.p for eps in epsilons]
        if config.kind == "multiplier":
            points = range(len(config.norm.points))
            return [(N, index, eps) for N in resolutions for index in points for eps in epsilons]
        return [(N,) for N in resolutions]

    def _execute(self) -> List[ResultRecord]:
        tasks = [(self.config, self.config.kind, cell) for cell in self._cells()]
        logger.info(f"Running {len(tasks)} {self.config.kind} cells on {self.config.workers} worker(s)")
        if self.config.workers == 1:
            chunks = [_run_cell(task) for task in tasks]
        else:
            with Pool(self.config.workers) as pool:
                chunks = pool.map(_run_cell, tasks)
        return sorted((record for chunk in chunks for record in chunk), key=ResultRecord.sort_key)

    def _classify_series(self, records: List[ResultRecord], contract) -> List[ResultRecord]:
        """Attach slope and verdict to every sweep series; ``contract`` maps a series to its expected verdicts."""
        groups: Dict[Tuple, List[ResultRecord]] = defaultdict(list)
        for record in records:
            groups[(record.quantity, record.p, record.s, record.t, record.u_lambda)].append(record)

        out = []
        for key, series in groups.items():
            series.sort(key=lambda record: record.N)
            if any(record.verdict == "degenerate" for record in series):
                out.extend(record.model_copy(update={"verdict": "degenerate"}) for record in series)
                continue
            slope, verdict = classify_boundedness(
                [(record.N, record.value) for record in series],
                self.config.sweep.bounded_slope, self.config.sweep.divergent_slope,
            )
            expected = contract(series[0])
            if expected is None:
                verdict_out = "observed"
            else:
                verdict_out = verdict
                if verdict not in expected:
                    self.violations.append(
                        f"{series[0].quantity} at {series_label(series[0])}: {verdict} (slope {slope:.4f}), "
                        f"expected {' or '.join(expected)}"
                    )
            out.extend(record.model_copy(update={"slope": slope, "verdict": verdict_out}) for record in series)
        return sorted(out, key=ResultRecord.sort_key)

    # ---------------- experiments ----------------
    def strichartz_contract(self, record: ResultRecord) -> Optional[Tuple[str, ...]]:
        """Expected verdicts of a Strichartz series; the full Sobolev ratio converges too slowly to carry one."""
        if "finest_band_ratio" not in record.quantity:
            return None
        sweep = self.config.sweep
        low, high = strichartz_interval(record.p)
        if low + sweep.contract_margin <= record.t <= high - sweep.contract_margin:
            return ("bounded",)
        outside = max(low - record.t, record.t - high)
        if outside >= sweep.divergence_margin:
            return ("divergent",)
        if outside >= sweep.contract_margin:
            return ("divergent", "inconclusive")
        return None

    def run_strichartz_scan(self) -> List[ResultRecord]:
        return self._classify_series(self._execute(), self.strichartz_contract)

    def run_multiplier_scan(self) -> List[ResultRecord]:
        cone = build_cone(self.config)
        transversal = {}

        def contract(record: ResultRecord):
            if not record.quantity.startswith("multiplier_ratio"):
                return None
            params = NormParams(p=record.p, s=record.s, t=record.t, r=record.r)
            key = record.u_lambda
            if key not in transversal:
                spec = self.config.indicator.build(self.config.grid.dim, 1.0, self.config.grid.support_radius, 0.0)
                transversal[key] = is_transversal(spec, cone)
            if params.theorem_admissible and transversal[key]:
                return ("bounded",)
            return None

        return self._classify_series(self._execute(), contract)

    def run_lemma_suite(self) -> List[ResultRecord]:
        records = self._execute()
        records = records + self._drift_records(records, {"kernel_l1_max": L1_DRIFT_LIMIT,
                                                          "product_ratio": settings.DRIFT_TOL})
        self.violations.extend(
            f"{record.quantity} at N={record.N}: {record.value:.6g}" for record in records if record.verdict == "fail"
        )
        return sorted(records, key=ResultRecord.sort_key)

    def run_kernel_decay(self) -> List[ResultRecord]:
        records = self._execute()
        self.violations.extend(
            f"{record.quantity} ({record.u_lambda}) at N={record.N}: {record.value:.6g}"
            for record in records if record.verdict == "fail"
        )
        return records

    def _drift_records(self, records: Iterable[ResultRecord], limits: Dict[str, float]) -> List[ResultRecord]:
        """Largest relative change between consecutive resolutions of each listed quantity."""
        groups: Dict[Tuple, List[ResultRecord]] = defaultdict(list)
        for record in records:
            if record.quantity in limits and record.N is not None:
                groups[(record.quantity, record.p, record.s)].append(record)
        out = []
        for (quantity, p, s), series in sorted(groups.items(), key=lambda item: item[0][0]):
            series.sort(key=lambda record: record.N)
            drift = 0.0
            for previous, current in zip(series, series[1:]):
                if previous.value > 0:
                    drift = max(drift, abs(current.value - previous.value) / previous.value)
            verdict = "pass" if drift < limits[quantity] else "fail"
            out.append(_record(self.config, p=p, s=s, quantity=f"{quantity}_drift", value=drift, verdict=verdict))
        return out

    def build_corpus(self, out_dir) -> Dict:
        """Write every corpus member per resolution, a manifest and the leaf family file."""
        out_dir = Path(out_dir)
        config = self.config
        cone = build_cone(config)
        manifest = {"seed": config.seed, "kinds": list(config.corpus.kinds), "members": []}
        for N in config.sweep.resolutions:
            spec = grid_spec(config, N)
            boundary = None
            if config.corpus.on_boundary:
                boundary = config.indicator.build(spec.dim, spec.spacing, spec.support_radius, 0.0)
            for index, member in enumerate(make_corpus(config.corpus_spec(boundary), spec, cone)):
                name = f"N{N}/{index:03d}_{member.kind}.grid"
                write_grid_function(member, out_dir / name)
                manifest["members"].append({
                    "file": name, "N": N, "kind": member.kind, "supported": member.supported,
                    "sup_norm": member.sup_norm(),
                })
            if cone is not None and N == config.sweep.resolutions[-1]:
                family = build_family(config, spec, cone)
                write_leaf_family(family, out_dir / "leaf_family.ini")
                manifest["leaf_count"] = len(family)
        write_json(out_dir / "manifest.json", manifest)
        logger.info(f"Corpus written to {out_dir} ({len(manifest['members'])} files)")
        return manifest

    def run(self) -> List[ResultRecord]:
        runners = {
            "strichartz": self.run_strichartz_scan,
            "multiplier": self.run_multiplier_scan,
            "lemmas": self.run_lemma_suite,
            "kernel-decay": self.run_kernel_decay,
        }
        if self.config.kind not in runners:
            raise ConfigError(f"{self.config.kind} is not a sweep experiment")
        return runners[self.config.kind]()

    def thresholds(self) -> Dict[str, float]:
        sweep = self.config.sweep
        return {
            "bounded_slope": sweep.bounded_slope,
            "divergent_slope": sweep.divergent_slope,
            "contract_margin": sweep.contract_margin,
            "divergence_margin": sweep.divergence_margin,
        }

    def write(self, records: List[ResultRecord], out_dir) -> Path:
        out_dir = Path(out_dir)
        stem = self.config.kind.replace("-", "_")
        if self.config.output_format == "json":
            return write_results_json(records, out_dir / f"{stem}.json", self.thresholds())
        path = write_results_csv(records, out_dir / f"{stem}.csv", self.thresholds())
        if self.config.kind in ("strichartz", "multiplier"):
            labels = sorted({series_label(record) for record in records if record.slope is not None})
            write_gnuplot_script(path, labels, out_dir / f"{stem}.gp", self.config.kind)
        return path


# ===============================
# ENTRY POINTS
# ===============================
def run_strichartz_scan(config: ExperimentConfig) -> List[ResultRecord]:
    return ExperimentRunner(config).run_strichartz_scan()


def run_multiplier_scan(config: ExperimentConfig) -> List[ResultRecord]:
    return ExperimentRunner(config).run_multiplier_scan()


def run_lemma_suite(config: ExperimentConfig) -> List[ResultRecord]:
    return ExperimentRunner(config).run_lemma_suite()


def run_kernel_decay(config: ExperimentConfig) -> List[ResultRecord]:
    return ExperimentRunner(config).run_kernel_decay()
