"""
Tests for config loading, verdicts, the corpus and the sweep runner.

Sweeps run on small lattices with a single worker.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st
from pydantic import ValidationError

from anisolab.exceptions import ConfigError, ContractViolation, ParameterRangeError
from anisolab.main import EXIT_CONFIG, EXIT_CONTRACT, EXIT_OK, build_parser, main, run
from anisolab.schemas.experiment import (
    CorpusSpec,
    ExperimentConfig,
    IndicatorSpec,
    NormSection,
    ResultRecord,
    SweepSection,
)
from anisolab.services.corpus import is_transversal, make_corpus, make_indicator
from anisolab.services.experiments import (
    ExperimentRunner,
    classify_boundedness,
    kernel_decay_cell,
    lemma_cell,
    load_config,
    multiplier_cell,
    run_strichartz_scan,
    strichartz_interval,
)
from anisolab.services.grid_spectral import out_of_band_fraction
from anisolab.services.paraproduct import single_coordinate_deviation
from anisolab.utils.io import read_grid_function

CONFIG_DIR = Path(__file__).parent / "configs"

STRICHARTZ_INI = """
[grid]
dim = 1
d_s = 1

[norm]
p = 2
t_min = 0
t_max = 1.5
t_step = 0.25

[indicator]
shape = half_space
normal = 1
epsilon_cells = 0

[corpus]
kinds = smooth_bump
count = 1

[sweep]
resolutions = 128, 256, 512
"""

SMALL_2D_INI = """
[grid]
dim = 2
d_s = 1

[norm]
points = 2.0/-0.4/0.2

[leaves]
translations = 1

[corpus]
kinds = gaussian
count = 1

[sweep]
resolutions = 64, 128, 256
"""


def write_config(tmp_path: Path, text: str, name: str = "experiment.ini") -> str:
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestClassify:
    """Slope fits and the verdicts they imply."""

    sizes = (64, 128, 256, 512)

    def test_constant_is_bounded(self):
        slope, verdict = classify_boundedness([(n, 3.0) for n in self.sizes])
        assert slope == pytest.approx(0.0, abs=1e-12)
        assert verdict == "bounded"

    def test_square_root_is_divergent(self):
        slope, verdict = classify_boundedness([(n, math.sqrt(n)) for n in self.sizes])
        assert slope == pytest.approx(0.5)
        assert verdict == "divergent"

    def test_slow_growth_is_inconclusive(self):
        assert classify_boundedness([(n, n ** 0.1) for n in self.sizes])[1] == "inconclusive"

    @hsettings(max_examples=30)
    @given(st.floats(min_value=-1.0, max_value=0.04), st.floats(min_value=0.1, max_value=10.0))
    def test_power_laws_below_threshold(self, exponent, scale):
        assert classify_boundedness([(n, scale * n ** exponent) for n in self.sizes])[1] == "bounded"

    def test_needs_three_points(self):
        with pytest.raises(ParameterRangeError, match="at least 3"):
            classify_boundedness([(64, 1.0), (128, 1.0)])

    def test_needs_positive_values(self):
        with pytest.raises(ParameterRangeError):
            classify_boundedness([(64, 1.0), (128, 0.0), (256, 1.0)])

    def test_strichartz_interval(self):
        assert strichartz_interval(2.0) == (-0.5, 0.5)
        low, high = strichartz_interval(4.0)
        assert (low, high) == pytest.approx((-0.75, 0.25))


class TestConfig:
    """INI loading and validation."""

    def test_defaults_per_kind(self):
        config = load_config(None, "strichartz")
        assert config.grid.dim == 1
        assert config.grid.box_length == pytest.approx(2 * math.pi)
        assert config.sweep.resolutions == [128, 256, 512, 1024]

    def test_overrides(self, tmp_path):
        config = load_config(write_config(tmp_path, SMALL_2D_INI), "multiplier", seed=5, workers=2)
        assert (config.seed, config.workers) == (5, 2)
        assert config.grid.support_radius == pytest.approx(math.pi / 4)

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config sections"):
            load_config(write_config(tmp_path, "[bogus]\nx = 1\n"), "lemmas")

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, "[grid]\nfoo = 1\n"), "lemmas")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(str(tmp_path / "absent.ini"), "lemmas")

    def test_inadmissible_multiplier_point(self, tmp_path):
        text = SMALL_2D_INI.replace("2.0/-0.4/0.2", "2.0/-0.1/0.2")
        with pytest.raises(ConfigError, match="inadmissible parameters"):
            load_config(write_config(tmp_path, text), "multiplier")

    def test_band_limited_rejected_for_multiplier(self, tmp_path):
        text = SMALL_2D_INI.replace("kinds = gaussian", "kinds = gaussian, band_limited")
        with pytest.raises(ConfigError, match="band_limited"):
            load_config(write_config(tmp_path, text), "multiplier")

    def test_x1_profile_rejected_for_multiplier(self, tmp_path):
        text = SMALL_2D_INI.replace("kinds = gaussian", "kinds = gaussian, x1_profile")
        with pytest.raises(ConfigError, match="x1_profile"):
            load_config(write_config(tmp_path, text), "multiplier")

    def test_divergence_margin_below_contract_margin(self):
        with pytest.raises(ValidationError, match="divergence_margin"):
            SweepSection(contract_margin=0.25, divergence_margin=0.125)

    def test_unusable_resolution(self, tmp_path):
        text = SMALL_2D_INI.replace("64, 128, 256", "32, 64, 128")
        with pytest.raises(ConfigError, match="N=32"):
            load_config(write_config(tmp_path, text), "lemmas")

    def test_norm_section_parsing(self):
        section = NormSection(points="2/-0.4/0.2, 1.5/-0.2/0.1", p="1.5, 4")
        assert [params.p for params in section.params()] == [2.0, 1.5]
        assert section.p == [1.5, 4.0]
        assert len(NormSection().t_values()) == 17

    def test_sweep_needs_three_resolutions(self):
        with pytest.raises(ValidationError, match="at least 3"):
            SweepSection(resolutions="64, 128")


class TestCorpus:
    """Indicators and the deterministic test-function corpus."""

    def test_half_space_pattern(self, grid2d):
        indicator = make_indicator(IndicatorSpec(normal=(1.0, 0.0)), grid2d)
        assert set(np.unique(indicator.values.real)) == {0.0, 1.0}
        assert np.all(indicator.values == indicator.values[:, :1])
        assert single_coordinate_deviation(indicator) <= 1e-12

    def test_strip_outside_box(self, grid2d):
        spec = IndicatorSpec(normal=(1.0, 0.0), shape="strip", offset=1.5, width=0.5)
        with pytest.raises(ParameterRangeError, match="exceeds the box"):
            make_indicator(spec, grid2d)

    def test_normal_must_be_unit(self):
        with pytest.raises(ValidationError, match="unit vector"):
            IndicatorSpec(normal=(1.0, 1.0))

    def test_transversality(self, cone):
        assert is_transversal(IndicatorSpec(normal=(1.0, 0.0)), cone)
        assert not is_transversal(IndicatorSpec(normal=(0.0, 1.0)), cone)

    def test_deterministic(self, grid2d, cone):
        spec = CorpusSpec(seed=4)
        first = make_corpus(spec, grid2d, cone)
        second = make_corpus(spec, grid2d, cone)
        assert len(first) == 2 * len(spec.kinds)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.values, b.values)

    def test_members_independent_of_resolution(self, grid2d):
        spec = CorpusSpec(kinds=["gaussian"], count=2, seed=9)
        fine = make_corpus(spec, grid2d.model_copy(update={"points_per_axis": 256}))
        coarse = make_corpus(spec, grid2d)
        for a, b in zip(coarse, fine):
            np.testing.assert_allclose(a.values, b.values[::2, ::2], atol=1e-14)

    def test_supported_members(self, grid2d, cone):
        for member in make_corpus(CorpusSpec(seed=1), grid2d, cone):
            assert member.supported
            assert member.support_leak() < 1e-12

    def test_band_limited_member(self, grid2d):
        (member,) = make_corpus(CorpusSpec(kinds=["band_limited"], count=1, seed=2), grid2d)
        assert not member.supported
        assert out_of_band_fraction(member.values, grid2d, 8.0) < 1e-10

    def test_smooth_bump_member(self, grid2d):
        (member,) = make_corpus(CorpusSpec(kinds=["smooth_bump"], count=1, seed=2), grid2d)
        assert member.supported
        assert member.support_leak() == 0.0
        assert member.values[grid2d.N // 2, grid2d.N // 2] == pytest.approx(1.0)

    def test_x1_profile_member(self, grid2d):
        for member in make_corpus(CorpusSpec(kinds=["x1_profile"], count=2, seed=2), grid2d):
            assert not member.supported
            assert np.all(member.values == member.values[:, :1])
            assert single_coordinate_deviation(member) <= 1e-12

    def test_members_centred_on_boundary(self, grid2d, cone):
        boundary = IndicatorSpec(normal=(1.0, 0.0), offset=0.125)
        spec = CorpusSpec(kinds=["smooth_bump", "gaussian", "plane_wave_mix"], count=3, seed=5, boundary=boundary)
        x1, _ = grid2d.coordinates()
        for member in make_corpus(spec, grid2d, cone):
            peak = np.unravel_index(np.argmax(np.abs(member.values)), grid2d.shape)
            if member.kind != "plane_wave_mix":
                assert abs(x1[peak] - 0.125) <= grid2d.spacing
            assert member.support_leak() < 1e-12

    def test_boundary_offset_limited(self, grid2d):
        boundary = IndicatorSpec(normal=(1.0, 0.0), offset=grid2d.support_radius / 2)
        with pytest.raises(ParameterRangeError, match="boundary offset"):
            make_corpus(CorpusSpec(kinds=["gaussian"], count=1, boundary=boundary), grid2d)


class TestRunner:
    """Verdict attachment and small end-to-end sweeps."""

    def records(self, values, verdict="observed"):
        return [
            ResultRecord(experiment="multiplier", p=2.0, s=-0.4, t=0.2, N=n, quantity="multiplier_ratio_eps0",
                         value=value, verdict=verdict, seed=0)
            for n, value in zip((64, 128, 256), values)
        ]

    def test_degenerate_series(self):
        runner = ExperimentRunner(ExperimentConfig(kind="multiplier"))
        out = runner._classify_series(self.records([0.0, 0.0, 0.0], "degenerate"), lambda record: ("bounded",))
        assert {record.verdict for record in out} == {"degenerate"}
        assert runner.violations == []

    def test_contract_violation_recorded(self):
        runner = ExperimentRunner(ExperimentConfig(kind="multiplier"))
        out = runner._classify_series(self.records([1.0, 2.0, 4.0]), lambda record: ("bounded",))
        assert {record.verdict for record in out} == {"divergent"}
        assert all(record.slope == pytest.approx(1.0) for record in out)
        assert len(runner.violations) == 1

    def test_series_without_contract_is_observed(self):
        runner = ExperimentRunner(ExperimentConfig(kind="multiplier"))
        out = runner._classify_series(self.records([1.0, 1.0, 1.0]), lambda record: None)
        assert {record.verdict for record in out} == {"observed"}

    def test_strichartz_sweep(self, tmp_path):
        runner = ExperimentRunner(load_config(write_config(tmp_path, STRICHARTZ_INI), "strichartz"))
        records = runner.run_strichartz_scan()
        assert runner.violations == []
        finest = {record.t: record for record in records if record.quantity == "finest_band_ratio_eps0"}
        assert finest[0.0].verdict == "bounded"
        assert finest[0.25].verdict == "bounded"
        assert finest[0.5].verdict == "observed"
        assert finest[1.0].verdict == "divergent"
        assert finest[1.5].verdict == "divergent"
        # the top band of a jump scales like N^(t - 1/p)
        assert finest[0.0].slope == pytest.approx(-0.5, abs=0.05)
        assert finest[1.5].slope == pytest.approx(1.0, abs=0.05)
        sobolev = [record for record in records if record.quantity == "sobolev_ratio_eps0"]
        assert {record.verdict for record in sobolev} == {"observed"}
        assert all(record.value <= 1.0 + 1e-12 for record in sobolev if record.t == 0.0)

    def finest(self, t, values, p=2.0):
        return [
            ResultRecord(experiment="strichartz", p=p, t=t, N=n, quantity="finest_band_ratio_eps0",
                         value=value, verdict="observed", seed=0)
            for n, value in zip((128, 256, 512), values)
        ]

    def test_far_exterior_must_diverge(self):
        runner = ExperimentRunner(ExperimentConfig(kind="strichartz"))
        # slope 0.1 is inconclusive; one unit past the interval that breaks the contract
        out = runner._classify_series(self.finest(1.5, [1.0, 2 ** 0.1, 2 ** 0.2]), runner.strichartz_contract)
        assert {record.verdict for record in out} == {"inconclusive"}
        assert len(runner.violations) == 1
        assert "expected divergent" in runner.violations[0]

    def test_near_exterior_may_stay_inconclusive(self):
        runner = ExperimentRunner(ExperimentConfig(kind="strichartz"))
        runner._classify_series(self.finest(0.625, [1.0, 2 ** 0.1, 2 ** 0.2]), runner.strichartz_contract)
        assert runner.violations == []

    def test_sobolev_ratio_carries_no_contract(self):
        runner = ExperimentRunner(ExperimentConfig(kind="strichartz"))
        records = [record.model_copy(update={"quantity": "sobolev_ratio_eps0"})
                   for record in self.finest(0.0, [1.0, 2.0, 4.0])]
        out = runner._classify_series(records, runner.strichartz_contract)
        assert {record.verdict for record in out} == {"observed"}
        assert runner.violations == []

    def test_multiplier_cell(self, tmp_path):
        text = SMALL_2D_INI.replace("[sweep]", "[sweep]\ndiagnostics = true")
        config = load_config(write_config(tmp_path, text), "multiplier")
        records = multiplier_cell(config, 64, 0, 0.0)
        quantities = {record.quantity for record in records}
        assert "multiplier_ratio_eps0" in quantities
        assert {"pi1_ratio_eps0", "pi2_ratio_eps0", "pi3_ratio_eps0"} <= quantities
        ratio = next(record for record in records if record.quantity == "multiplier_ratio_eps0")
        assert 0.0 < ratio.value < math.inf
        assert ratio.u_lambda == "(1 0)"

    def test_lemma_cell(self, tmp_path):
        config = load_config(write_config(tmp_path, SMALL_2D_INI), "lemmas")
        records = {record.quantity: record for record in lemma_cell(config, 128)}
        for quantity in (
            "partition_residual", "dft_roundtrip", "almost_orthogonality", "paraproduct_residual",
            "paraproduct_symmetry", "support_f1", "support_f2", "single_coordinate_deviation",
            "kernel_l1_variation", "symbol_derivative_spread", "nikolskij_growth", "leafwise_young",
        ):
            assert records[quantity].verdict == "pass", quantity
        assert records["kernel_l1_variation"].value < 1.25
        assert records["leafwise_young"].value <= 1.1
        assert records["support_f1_stated"].verdict == "observed"
        assert records["indicator_leaf_profile"].verdict == "observed"

    def test_nikolskij_needs_three_bands(self, tmp_path):
        config = load_config(write_config(tmp_path, SMALL_2D_INI), "lemmas")
        records = {record.quantity: record for record in lemma_cell(config, 64)}
        assert records["nikolskij_growth"].verdict == "observed"

    def test_product_ratio_settles(self, tmp_path):
        config = load_config(write_config(tmp_path, SMALL_2D_INI), "lemmas")
        ratios = [
            next(record.value for record in lemma_cell(config, N) if record.quantity == "product_ratio")
            for N in (128, 256)
        ]
        assert abs(ratios[1] - ratios[0]) / ratios[0] < 0.10

    def test_pairs_configurable(self):
        assert SweepSection().pairs == 20
        assert SweepSection(pairs="3").pairs == 3
        with pytest.raises(ValidationError):
            SweepSection(pairs=0)

    def test_kernel_decay_cell(self, tmp_path):
        config = load_config(write_config(tmp_path, SMALL_2D_INI), "kernel-decay")
        records = {record.quantity: record for record in kernel_decay_cell(config, 128)}
        assert records["kernel_max_horizontal"].verdict == "pass"
        assert records["kernel_max_affine"].verdict == "pass"
        assert records["calibrated_separation"].value <= 1.0


class TestCommandLine:
    """Exit codes and reproducible output files."""

    def test_config_error_exit_code(self, tmp_path):
        path = write_config(tmp_path, SMALL_2D_INI.replace("2.0/-0.4/0.2", "2.0/-0.1/0.2"))
        assert main(["multiplier", "--config", path, "--out", str(tmp_path / "out")]) == EXIT_CONFIG

    def test_csv_reproducible(self, tmp_path):
        path = write_config(tmp_path, STRICHARTZ_INI)
        first = main(["strichartz", "--config", path, "--out", str(tmp_path / "a")])
        second = main(["strichartz", "--config", path, "--out", str(tmp_path / "b")])
        assert first == second
        text = (tmp_path / "a" / "strichartz.csv").read_text()
        assert text == (tmp_path / "b" / "strichartz.csv").read_text()
        lines = text.splitlines()
        assert lines[0].startswith("# bounded_slope=")
        assert lines[1].startswith("experiment,p,s,t,r,N")
        assert (tmp_path / "a" / "strichartz.gp").exists()

    def test_json_output(self, tmp_path):
        path = write_config(tmp_path, STRICHARTZ_INI)
        main(["strichartz", "--config", path, "--out", str(tmp_path), "--format", "json"])
        assert (tmp_path / "strichartz.json").exists()

    def test_corpus_files(self, tmp_path):
        path = write_config(tmp_path, SMALL_2D_INI)
        out = tmp_path / "corpus"
        assert main(["corpus", "--config", path, "--out", str(out), "--seed", "3"]) == EXIT_OK
        assert (out / "manifest.json").exists()
        assert (out / "leaf_family.ini").exists()
        member = read_grid_function(out / "N64" / "000_gaussian.grid", kind="gaussian")
        config = load_config(path, "corpus", seed=3)
        boundary = config.indicator.build(2, member.spec.spacing, member.spec.support_radius, 0.0)
        (expected,) = make_corpus(config.corpus_spec(boundary), member.spec)
        np.testing.assert_array_equal(member.values, expected.values)

    def test_contract_violation_exit_code(self, tmp_path, capsys):
        text = STRICHARTZ_INI.replace("resolutions = 128, 256, 512", "resolutions = 128, 256, 512\nbounded_slope = -5\ndivergent_slope = -4")
        path = write_config(tmp_path, text)
        assert main(["strichartz", "--config", path, "--out", str(tmp_path / "out")]) == EXIT_CONTRACT
        response = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert response["success"] is False
        assert response["data"]["violations"]
        assert response["message"].endswith("contract(s) violated")

    def test_contract_violation_message_is_readable(self, tmp_path):
        text = STRICHARTZ_INI.replace("resolutions = 128, 256, 512", "resolutions = 128, 256, 512\nbounded_slope = -5\ndivergent_slope = -4")
        path = write_config(tmp_path, text)
        args = build_parser().parse_args(["strichartz", "--config", path, "--out", str(tmp_path / "out")])
        with pytest.raises(ContractViolation) as caught:
            run(args)
        assert str(caught.value).endswith("contract(s) violated")
        assert not str(caught.value).startswith("{")
        assert caught.value.response["data"]["records"] > 0


class TestShippedConfigs:
    """The experiment files under configs/ run clean end to end."""

    def test_strichartz(self, tmp_path):
        path = str(CONFIG_DIR / "strichartz.ini")
        assert main(["strichartz", "--config", path, "--out", str(tmp_path)]) == EXIT_OK
        text = (tmp_path / "strichartz.csv").read_text()
        assert "finest_band_ratio_eps0" in text
        assert ",divergent," in text and ",bounded," in text

    def test_multiplier(self, tmp_path):
        path = str(CONFIG_DIR / "multiplier.ini")
        assert main(["multiplier", "--config", path, "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "multiplier.csv").exists()

    def test_lemmas(self, tmp_path):
        path = str(CONFIG_DIR / "lemmas.ini")
        assert main(["lemmas", "--config", path, "--out", str(tmp_path)]) == EXIT_OK
