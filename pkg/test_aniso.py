import math

import numpy as np
import pytest

from anisolab.exceptions import ParameterRangeError, SupportError
from anisolab.schemas.grid import GridFunction
from anisolab.schemas.norms import NormParams
from anisolab.services.aniso import aniso_norm, chart_profile, chart_profiles, embedding_ratio, leafwise_besov_norm
from anisolab.services.corpus import make_member
from anisolab.services.leaves import LeafRestrictor, horizontal_leaf
from anisolab.services.norms import besov_norm
from conftest import bump, plane_wave

PARAMS = NormParams(p=2.0, s=-0.4, t=0.2)


class TestAnisoNorm:
    """The anisotropic norm over a finite leaf family."""

    def test_plane_wave_on_horizontal_leaf(self, grid2d, horizontal_family):
        f = plane_wave(grid2d, (2.0, 0.0))
        report = aniso_norm(f, horizontal_family, PARAMS, check_supported=False)
        expected = 2.0 ** PARAMS.t * 2.0 ** PARAMS.s * math.sqrt(math.pi)
        assert report.value == pytest.approx(expected, rel=1e-10)
        assert (report.l_outer, report.l_inner) == (1, 1)

    def test_rejects_inadmissible_parameters(self, grid2d, horizontal_family):
        with pytest.raises(ParameterRangeError, match="inadmissible"):
            aniso_norm(bump(grid2d), horizontal_family, NormParams(p=2.0, s=-0.1, t=0.2))

    def test_rejects_unsupported_input(self, grid2d, horizontal_family):
        with pytest.raises(SupportError):
            aniso_norm(plane_wave(grid2d, (2.0, 0.0)), horizontal_family, PARAMS)

    def test_homogeneous(self, grid2d, family):
        f = bump(grid2d)
        scaled = f.with_values(-2.5 * f.values, supported=True)
        assert aniso_norm(scaled, family, PARAMS).value == pytest.approx(2.5 * aniso_norm(f, family, PARAMS).value)

    def test_triangle_inequality(self, grid2d, family):
        f = bump(grid2d)
        g = make_member("smooth_bump", grid2d, np.random.default_rng(3))
        total = f.with_values(f.values - 0.7j * g.values, supported=True)
        scaled = g.with_values(-0.7j * g.values, supported=True)
        bound = aniso_norm(f, family, PARAMS).value + aniso_norm(scaled, family, PARAMS).value
        assert aniso_norm(total, family, PARAMS).value <= bound + 1e-10

    def test_monotone_in_family(self, grid2d, family):
        f = bump(grid2d)
        full = aniso_norm(f, family, PARAMS)
        part = aniso_norm(f, family.subset([0, 1, 2]), PARAMS)
        assert part.value <= full.value
        assert len(full.band_table) == len(family)

    def test_report_value_is_table_max(self, grid2d, family):
        report = aniso_norm(bump(grid2d), family, PARAMS)
        assert report.value == max(max(row) for row in report.band_table.values())
        assert report.band_table[report.leaf_id][report.l_outer] == report.value

    def test_merge_takes_larger(self, grid2d, family):
        f = bump(grid2d)
        first = aniso_norm(f, family, PARAMS, leaves=family.leaves[:5])
        second = aniso_norm(f, family, PARAMS, leaves=family.leaves[5:])
        merged = first.merge(second)
        assert merged.value == pytest.approx(aniso_norm(f, family, PARAMS).value, rel=1e-12)
        assert len(merged.band_table) == len(family)

    def test_embedding_ratio(self, grid2d, family):
        ratio = embedding_ratio(bump(grid2d), family, PARAMS)
        assert 0.0 < ratio < math.inf


class TestLeafwiseNorm:
    """Leafwise Besov norms of restrictions."""

    def test_horizontal_matches_line_norm(self, grid2d, cone):
        x1, x2 = grid2d.coordinates()
        f = GridFunction(spec=grid2d, values=np.exp(-8 * x1 ** 2) * np.exp(-8 * x2 ** 2))
        line = GridFunction(spec=grid2d.line_spec(), values=f.values[:, grid2d.N // 2])
        leafwise = leafwise_besov_norm(f, horizontal_leaf(cone, math.pi), -0.3, 2.0)
        assert leafwise == pytest.approx(besov_norm(line, -0.3, 2.0), rel=1e-10)

    def test_column_profiles_match_single_profile(self, grid2d, family):
        restrictor = LeafRestrictor(family.leaves[1], grid2d)
        rng = np.random.default_rng(8)
        columns = rng.normal(size=restrictor.chart.shape + (3,))
        batched = chart_profiles(columns, restrictor, -0.3, 2.0)
        for j in range(3):
            single = chart_profile(columns[..., j], restrictor.weights, restrictor, -0.3, 2.0)[0]
            assert batched[j] == pytest.approx(single, rel=1e-12)

    def test_rejects_inner_smoothness(self, grid2d, cone):
        with pytest.raises(ParameterRangeError):
            leafwise_besov_norm(bump(grid2d), horizontal_leaf(cone, math.pi), -2.5, 2.0)
