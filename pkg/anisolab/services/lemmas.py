"""
Per-resolution checks behind the lemma suite.

Each check returns ResultRecords with verdict pass/fail against a fixed contract, or
observed when the quantity only becomes meaningful across a sweep (drifts are judged by
the runner once every resolution is in).
"""

import logging
from typing import Callable, List, Optional

import numpy as np
from scipy import fft as sfft

from anisolab.config import settings
from anisolab.schemas.experiment import ExperimentConfig, IndicatorSpec, ResultRecord
from anisolab.schemas.grid import GridFunction, GridSpec
from anisolab.schemas.leaves import LeafFamily
from anisolab.services.corpus import make_corpus, make_indicator, make_member
from anisolab.services.grid_spectral import (
    dft_forward,
    dft_inverse,
    dyadic_symbol,
    frequency_radius,
    kernel_l1_masses,
    measurement_lattice,
    partial_sum_l1_masses,
    partial_sum_symbol,
    partition_residual,
    symbol_derivative_maxima,
    window_kernel,
)
from anisolab.services.norms import nikolskij_ratio
from anisolab.services.paraproduct import (
    indicator_leaf_profile,
    leafwise_young_check,
    paraproduct_split,
    product_inequality_ratio,
    single_coordinate_deviation,
    support_check,
)

logger = logging.getLogger(__name__)

L1_VARIATION_LIMIT = 1.25
L1_DRIFT_LIMIT = 0.05
DERIVATIVE_FACTOR = 2.0
NIKOLSKIJ_FIRST_BAND = 3


class LemmaContext:
    """Everything one resolution of the suite shares."""

    def __init__(self, config: ExperimentConfig, spec: GridSpec, family: Optional[LeafFamily]):
        self.config = config
        self.spec = spec
        self.family = family
        self.rng = np.random.default_rng([config.seed, spec.N])
        self.corpus = make_corpus(config.corpus_spec(), spec, cone=None)
        self.supported = [member for member in self.corpus if member.supported]

    def record(self, quantity: str, value: float, verdict: str, **params) -> ResultRecord:
        return ResultRecord(
            experiment="lemmas", N=self.spec.N, quantity=quantity, value=float(value),
            verdict=verdict, seed=self.config.seed, **params,
        )

    def check(self, quantity: str, value: float, limit: float, **params) -> ResultRecord:
        verdict = "pass" if value <= limit else "fail"
        return self.record(quantity, value, verdict, **params)

    def noise(self, limit_band: Optional[int] = None) -> GridFunction:
        values = self.rng.normal(size=self.spec.shape) + 1j * self.rng.normal(size=self.spec.shape)
        if limit_band is not None:
            values = sfft.ifftn(partial_sum_symbol(limit_band, frequency_radius(self.spec)) * sfft.fftn(values))
        return GridFunction(spec=self.spec, values=values, kind="noise")

    def strip(self, epsilon: float) -> GridFunction:
        normal = np.zeros(self.spec.dim)
        normal[0] = 1.0
        width = self.spec.support_radius / 2
        indicator = IndicatorSpec(normal=tuple(normal), shape="strip", offset=-width / 2, width=width, epsilon=epsilon)
        return make_indicator(indicator, self.spec)

    def profiles(self, count: int = 2) -> List[GridFunction]:
        return [
            make_member("x1_profile", self.spec, np.random.default_rng([self.config.seed, member]), centered=member == 0)
            for member in range(count)
        ]


# ===============================
# SPECTRAL FOUNDATIONS
# ===============================
def spectral_checks(ctx: LemmaContext) -> List[ResultRecord]:
    spec = ctx.spec
    records = [ctx.check("partition_residual", partition_residual(spec), 1e-12)]

    f = ctx.noise()
    back = dft_inverse(dft_forward(f))
    roundtrip = float(np.max(np.abs(back.values - f.values))) / f.sup_norm()
    records.append(ctx.check("dft_roundtrip", roundtrip, 1e-12))

    radius = frequency_radius(spec)
    overlap = 0.0
    for n in range(spec.n_max + 1):
        for m in range(n + 2, spec.n_max + 1):
            overlap = max(overlap, float(np.max(dyadic_symbol(n, radius) * dyadic_symbol(m, radius))))
    records.append(ctx.check("almost_orthogonality", overlap, 1e-10))

    wide = measurement_lattice(spec)
    masses = kernel_l1_masses(wide, range(1, spec.n_max + 1))
    variation = max(masses.values()) / min(masses.values())
    records.append(ctx.check("kernel_l1_variation", variation, L1_VARIATION_LIMIT))
    records.append(ctx.record("kernel_l1_max", max(masses.values()), "observed"))
    partial = partial_sum_l1_masses(wide, range(0, spec.n_max + 1))
    records.append(ctx.record("partial_sum_l1_max", max(partial.values()), "observed"))

    maxima = symbol_derivative_maxima(wide, bands=range(2, spec.n_max + 1))
    scaled = [2.0 ** n * value for n, value in maxima.items()]
    if scaled:
        spread = max(scaled) / min(scaled)
        records.append(ctx.check("symbol_derivative_spread", spread, DERIVATIVE_FACTOR))
    return records


# ===============================
# PARAPRODUCT AND SUPPORT FACTS
# ===============================
def paraproduct_checks(ctx: LemmaContext, pairs: Optional[int] = None) -> List[ResultRecord]:
    spec = ctx.spec
    pairs = ctx.config.sweep.pairs if pairs is None else pairs
    worst = 0.0
    asymmetry = 0.0
    for _ in range(pairs):
        f = ctx.noise(spec.n_max - 2)
        g = ctx.noise(spec.n_max - 2)
        terms = paraproduct_split(f, g)
        worst = max(worst, terms.residual / (f.sup_norm() * g.sup_norm()))
        swapped = paraproduct_split(g, f)
        asymmetry = max(asymmetry, float(np.max(np.abs(terms.pi3.values - swapped.pi1.values))))
    records = [
        ctx.check("paraproduct_residual", worst, 1e-8),
        ctx.check("paraproduct_symmetry", asymmetry, 0.0),
    ]

    f = ctx.noise()
    g = ctx.noise()
    for term_kind, k in (("f1", spec.n_max), ("f2", spec.n_max - 1)):
        exact = support_check(term_kind, k, f, g, region="exact")
        records.append(ctx.check(f"support_{term_kind}", exact, settings.BAND_LIMIT_TOL))
        stated = support_check(term_kind, k, f, g, region="stated")
        records.append(ctx.record(f"support_{term_kind}_stated", stated, "observed"))
    return records


def single_coordinate_checks(ctx: LemmaContext) -> List[ResultRecord]:
    """Strips and x1-only profiles keep every Littlewood-Paley block a function of x1."""
    if ctx.spec.dim < 2:
        return []
    members = [ctx.strip(epsilon) for epsilon in (0.0, ctx.spec.spacing)] + ctx.profiles()
    deviation = max(single_coordinate_deviation(member) for member in members)
    return [ctx.check("single_coordinate_deviation", deviation, 1e-12)]


def product_checks(ctx: LemmaContext) -> List[ResultRecord]:
    g = ctx.strip(ctx.spec.spacing)
    records = []
    for params in ctx.config.norm.params():
        ratios = [product_inequality_ratio(f, g, params.s, params.p) for f in ctx.supported]
        value = max((probe.value for probe in ratios), default=0.0)
        records.append(ctx.record("product_ratio", value, "observed", p=params.p, s=params.s))
    return records


# ===============================
# NIKOL'SKIJ AND YOUNG
# ===============================
def nikolskij_checks(ctx: LemmaContext, classify: Callable) -> List[ResultRecord]:
    """||S^j delta||_2 / (M^(1/2) ||S^j delta||_1) with M = 2^(j+1), j = 3..n_max, on the wide line lattice."""
    wide = measurement_lattice(ctx.spec)
    series = []
    for j in range(NIKOLSKIJ_FIRST_BAND, ctx.spec.n_max + 1):
        M = 2.0 ** (j + 1)
        series.append((M, nikolskij_ratio(window_kernel(j, wide, partial=True), 2.0, 1.0, M)))
    value = max((ratio for _, ratio in series), default=0.0)
    if len(series) < 3:
        return [ctx.record("nikolskij_growth", value, "observed")]
    slope, verdict = classify(series)
    return [ctx.record("nikolskij_growth", value, "pass" if verdict == "bounded" else "fail", slope=slope)]


def young_checks(ctx: LemmaContext) -> List[ResultRecord]:
    if ctx.family is None:
        return []
    spec = ctx.spec
    kernel = window_kernel(min(3, spec.n_max), spec)
    records = []
    for params in ctx.config.norm.params():
        ratio = max(
            (leafwise_young_check(kernel, f, ctx.family, params.s, params.p) for f in ctx.supported),
            default=0.0,
        )
        records.append(ctx.check("leafwise_young", ratio, settings.YOUNG_SLACK, p=params.p, s=params.s))
    return records


def indicator_profile_checks(ctx: LemmaContext) -> List[ResultRecord]:
    if ctx.family is None:
        return []
    records = []
    for p in sorted({params.p for params in ctx.config.norm.params()}):
        profile = indicator_leaf_profile(ctx.strip(0.0), ctx.family, p)
        records.append(ctx.record("indicator_leaf_profile", max(profile.values()), "observed", p=p))
    return records


def lemma_records(ctx: LemmaContext, classify: Callable) -> List[ResultRecord]:
    records = []
    records.extend(spectral_checks(ctx))
    records.extend(paraproduct_checks(ctx))
    records.extend(single_coordinate_checks(ctx))
    records.extend(product_checks(ctx))
    records.extend(nikolskij_checks(ctx, classify))
    records.extend(young_checks(ctx))
    records.extend(indicator_profile_checks(ctx))
    failed = [record.quantity for record in records if record.verdict == "fail"]
    if failed:
        logger.warning(f"❌ N={ctx.spec.N}: failed {', '.join(failed)}")
    else:
        logger.info(f"✅ N={ctx.spec.N}: all lemma contracts hold")
    return records
