import math

import numpy as np
import pytest
from pydantic import ValidationError

from anisolab.exceptions import LeafValidationError, SpecMismatchError
from anisolab.schemas.grid import GridFunction, GridSpec
from anisolab.schemas.leaves import LeafFamilyConfig
from anisolab.services.grid_spectral import shift
from anisolab.services.leaves import (
    chord_failures,
    contains_direction,
    horizontal_leaf,
    make_cone,
    make_graph_leaf,
    read_leaf_family,
    restrict_to_leaf,
    sample_leaf_family,
    sinusoidal_rejection_threshold,
    write_leaf_family,
)
from conftest import plane_wave


class TestCone:
    """Cone construction and membership."""

    def test_vertical_cone(self, cone):
        assert cone.horizontal_angle == pytest.approx(math.pi / 2)
        assert cone.max_slope == pytest.approx(math.tan(math.radians(55.0)))

    def test_rejects_cone_touching_horizontal(self):
        with pytest.raises(ValidationError, match="cone enlargement"):
            make_cone(1, 1, theta=math.radians(89.9))

    def test_membership(self, cone):
        theta = cone.aperture
        assert contains_direction(cone, (0.0, 1.0))
        assert contains_direction(cone, (0.0, -2.0))
        assert contains_direction(cone, (math.sin(theta), math.cos(theta)))
        assert not contains_direction(cone, (1.0, 0.0))
        assert not contains_direction(cone, (1.0, 1.0))

    def test_zero_direction(self, cone):
        with pytest.raises(ValueError, match="nonzero"):
            contains_direction(cone, (0.0, 0.0))


class TestLeafValidation:
    """Admissibility of single graph leaves."""

    def test_affine_unit_slope(self, cone):
        leaf = make_graph_leaf("affine", (1.0,), cone, 2.0, box_length=math.pi)
        assert leaf.slope_bound() == pytest.approx(1.0)
        assert leaf.closes_on_box

    def test_rejects_large_chart_norm(self, cone):
        with pytest.raises(LeafValidationError, match="chart norm"):
            make_graph_leaf("sinusoidal", (1.0, 0.0, 1.0), cone, 2.0, box_length=math.pi)

    def test_rejects_steep_slope(self, cone):
        with pytest.raises(LeafValidationError, match="chord transversality"):
            make_graph_leaf("affine", (1.8,), cone, 2.0, box_length=math.pi)

    def test_rejects_far_offset(self, cone):
        with pytest.raises(LeafValidationError, match="padded box"):
            make_graph_leaf("horizontal", (), cone, 2.0, x0=(0.0, 2.0), box_length=math.pi)

    def test_coefficient_count(self, cone):
        with pytest.raises(ValidationError, match="coefficients"):
            make_graph_leaf("sinusoidal", (0.1,), cone, 2.0, box_length=math.pi)

    def test_family_chords_stay_outside_the_cone(self, family, cone):
        for leaf in family:
            assert chord_failures(leaf, cone, pairs=10000, seed=1) == 0

    def test_sinusoidal_threshold_from_chart_bound(self, cone):
        # w = 2 on the box of side pi; C_F / w^3 binds before the slope
        threshold = sinusoidal_rejection_threshold(cone, 2.0, math.pi, (1.0,))
        assert threshold == pytest.approx(2.0 / 2.0 ** 3, rel=1e-6)

    def test_sinusoidal_threshold_from_slope(self, cone):
        threshold = sinusoidal_rejection_threshold(cone, 100.0, math.pi, (1.0,))
        assert threshold == pytest.approx(cone.max_slope / 2.0, rel=1e-6)
        with pytest.raises(LeafValidationError, match="chord transversality"):
            make_graph_leaf("sinusoidal", (1.01 * threshold, 0.0, 1.0), cone, 100.0, box_length=math.pi)


class TestFamily:
    """Sampled leaf families and their description files."""

    def test_default_size(self, family):
        assert len(family) == 25
        assert family.leaves[0].kind == "horizontal"
        assert {leaf.kind for leaf in family} == {"horizontal", "affine", "sinusoidal", "quadratic"}

    def test_translations_share_representative(self, family):
        for leaf in family:
            if leaf.kind != "horizontal":
                assert len(family.translates_of(leaf)) == 8

    def test_deterministic(self, grid2d, cone):
        first = sample_leaf_family(LeafFamilyConfig(), seed=11, cone=cone, spec=grid2d)
        second = sample_leaf_family(LeafFamilyConfig(), seed=11, cone=cone, spec=grid2d)
        assert first.leaves == second.leaves

    def test_horizontal_only(self, grid2d, cone):
        config = LeafFamilyConfig(affine=0, sinusoidal=0, quadratic=0, translations=4)
        family = sample_leaf_family(config, seed=3, cone=cone, spec=grid2d)
        assert len(family) == 4
        assert all(leaf.kind == "horizontal" for leaf in family)

    def test_subset(self, family):
        assert [leaf.leaf_id for leaf in family.subset([0, 2])] == [0, 2]

    def test_split_mismatch(self, cone):
        spec = GridSpec.create(1, 1, 256, 2 * math.pi, math.pi / 2)
        with pytest.raises(SpecMismatchError):
            sample_leaf_family(LeafFamilyConfig(), seed=1, cone=cone, spec=spec)

    def test_file_roundtrip(self, family, grid2d, cone, tmp_path):
        path = write_leaf_family(family, tmp_path / "family.ini")
        back = read_leaf_family(path, cone, grid2d)
        assert len(back) == len(family)
        assert back.seed == family.seed
        for original, read in zip(family, back):
            assert read.kind == original.kind
            assert read.coefficients == original.coefficients
            np.testing.assert_array_equal(read.shift_vector, original.shift_vector)


class TestRestriction:
    """Trigonometric restriction of grid functions to leaves."""

    def test_horizontal_weights_and_samples(self, grid2d, cone):
        x1, x2 = grid2d.coordinates()
        f = GridFunction(spec=grid2d, values=np.exp(-x1 ** 2) * (np.cos(x2) + 2.0))
        restricted = restrict_to_leaf(f, horizontal_leaf(cone, math.pi))
        np.testing.assert_allclose(restricted.weights, 1.0)
        np.testing.assert_allclose(restricted.values, f.values[:, grid2d.N // 2], atol=1e-12)

    def test_affine_plane_wave(self, grid2d, cone):
        leaf = make_graph_leaf("affine", (1.0,), cone, 2.0, box_length=math.pi)
        restricted = restrict_to_leaf(plane_wave(grid2d, (2.0, 4.0)), leaf)
        z = grid2d.axis_coordinates()
        np.testing.assert_allclose(restricted.values, np.exp(6.0j * z), atol=1e-10)
        np.testing.assert_allclose(restricted.weights, math.sqrt(2.0))

    def test_unstable_translation(self, grid2d, cone):
        cells = 5
        x1, x2 = grid2d.coordinates()
        f = GridFunction(spec=grid2d, values=np.exp(-4 * x1 ** 2 - 3 * x2 ** 2) * np.cos(3 * x1))
        base = make_graph_leaf("sinusoidal", (0.05, 0.3, 1.0), cone, 2.0, box_length=math.pi)
        moved = make_graph_leaf("sinusoidal", (0.05, 0.3, 1.0), cone, 2.0, x0=(0.0, cells * grid2d.spacing),
                                box_length=math.pi)
        expected = restrict_to_leaf(shift(f, (0, -cells)), base).values
        np.testing.assert_allclose(restrict_to_leaf(f, moved).values, expected, atol=1e-10)

    def test_lattice_mismatch(self, cone):
        spec = GridSpec.create(2, 1, 128, 2 * math.pi, math.pi / 2)
        f = GridFunction(spec=spec, values=np.ones(spec.shape))
        with pytest.raises(SpecMismatchError):
            restrict_to_leaf(f, horizontal_leaf(cone, math.pi))
