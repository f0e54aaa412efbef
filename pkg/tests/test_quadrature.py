"""Gauss rules, region partitioning, quad-tree refinement, singular scheme."""
import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gibem.errors import QuadratureError
from gibem.geometry import NurbsPatch
from gibem.kernels import Material, kelvin_T_many
from gibem.quadrature import (
    IntegrationRegion,
    gauss_rule,
    quadtree_refine,
    region_partition,
    singular_quadrature_points,
)
from gibem.splines import unit_interval_space


@pytest.fixture
def flat_patch():
    return NurbsPatch(
        unit_interval_space(1),
        unit_interval_space(1),
        np.array([[[0.0, 0, 0], [0, 1, 0]], [[1, 0, 0], [1, 1, 0]]]),
        np.ones((2, 2)),
    )


class TestGaussRule:
    def test_weights_sum_to_two(self):
        for order in (1, 2, 8, 33, 64):
            rule = gauss_rule(order)
            assert_allclose(rule.weights.sum(), 2.0, rtol=1e-14)
            assert_allclose(rule.nodes, -rule.nodes[::-1], atol=1e-15)

    def test_polynomial_exactness(self):
        rule = gauss_rule(5)
        # degree 9 is integrated exactly by 5 points
        val = (rule.weights * rule.nodes**8).sum()
        assert_allclose(val, 2.0 / 9.0, rtol=1e-13)

    @pytest.mark.parametrize("order", [0, -3, 65, 2.5])
    def test_rejects_bad_order(self, order):
        with pytest.raises(QuadratureError):
            gauss_rule(order)


class TestRegionPartition:
    def test_quadratic_pair_gives_four(self):
        space = unit_interval_space(2)
        regions = region_partition(space, space)
        assert len(regions) == 4
        assert_allclose(sum(r.area for r in regions), 1.0, atol=0)

    def test_linear_pair_gives_one(self):
        space = unit_interval_space(1)
        assert len(region_partition(space, space)) == 1

    def test_extra_line_adds_row(self):
        space = unit_interval_space(2)
        regions = region_partition(space, space, extra_v=[0.25])
        assert len(regions) == 6
        assert_allclose(sum(r.area for r in regions), 1.0, atol=1e-15)

    def test_collocation_points_on_corners(self):
        from gibem.splines import greville_abscissae

        space = unit_interval_space(3, [0.5])
        regions = region_partition(space, space)
        grev = greville_abscissae(space).abscissae
        corners = {
            (round(c[0], 12), round(c[1], 12))
            for r in regions
            for c in r.corners()
        }
        for gu in grev:
            for gv in grev:
                assert (round(gu, 12), round(gv, 12)) in corners

    def test_outside_cut_rejected(self):
        space = unit_interval_space(2)
        with pytest.raises(QuadratureError):
            region_partition(space, space, extra_u=[1.5])


class TestRegion:
    def test_split_preserves_area(self):
        region = IntegrationRegion(0.25, 0.75, 0.5, 1.0)
        kids = region.split()
        assert len(kids) == 4
        assert_allclose(sum(k.area for k in kids), region.area, atol=0)
        assert all(k.depth == 1 for k in kids)

    def test_empty_region_rejected(self):
        with pytest.raises(QuadratureError):
            IntegrationRegion(0.5, 0.5, 0.0, 1.0)

    def test_gauss_points_integrate_polynomial(self):
        region = IntegrationRegion(0.0, 0.5, 0.25, 1.0)
        params, wts = region.gauss_points(gauss_rule(4))
        val = (wts * params[:, 0] ** 2 * params[:, 1]).sum()
        exact = (0.5**3 / 3.0) * ((1.0**2 - 0.25**2) / 2.0)
        assert_allclose(val, exact, rtol=1e-14)


class TestSingularScheme:
    def test_inverse_r_center(self):
        """1/r over the unit square from its center has a closed form."""
        exact = 4.0 * np.log(1.0 + np.sqrt(2.0))
        region = IntegrationRegion(0, 1, 0, 1)
        errs = []
        for order in (8, 12, 16):
            pts, w = singular_quadrature_points(region, (0.5, 0.5), gauss_rule(order))
            r = np.linalg.norm(pts - np.array([0.5, 0.5]), axis=1)
            errs.append(abs((w / r).sum() - exact))
        assert errs[0] < 1e-5
        assert errs[1] < 1e-8
        assert errs[2] < 1e-6 * errs[0] + 1e-12
        assert errs[2] <= errs[1] <= errs[0]

    def test_inverse_r_corner(self):
        """A corner source fans into two triangles only."""
        region = IntegrationRegion(0, 1, 0, 1)
        pts, w = singular_quadrature_points(region, (0.0, 0.0), gauss_rule(12))
        assert len(w) == 2 * 12 * 12
        r = np.linalg.norm(pts, axis=1)
        assert_allclose((w / r).sum(), 2.0 * np.log(1.0 + np.sqrt(2.0)), atol=1e-9)

    def test_inverse_r_mid_edge(self):
        # frozen from an adaptive reference integration of the same integrand
        region = IntegrationRegion(0, 1, 0, 1)
        pts, w = singular_quadrature_points(region, (0.5, 0.0), gauss_rule(16))
        r = np.linalg.norm(pts - np.array([0.5, 0.0]), axis=1)
        assert_allclose((w / r).sum(), 2.406059125298018, atol=1e-9)

    def test_constant_is_exact(self):
        region = IntegrationRegion(0.25, 0.75, 0.5, 1.0)
        _, w = singular_quadrature_points(region, (0.3, 0.9), gauss_rule(8))
        assert_allclose(w.sum(), region.area, rtol=1e-13)

    def test_smooth_matches_tensor_rule(self):
        region = IntegrationRegion(0, 1, 0, 1)
        f = lambda p: np.cos(3.0 * p[:, 0]) * np.exp(p[:, 1])
        pts, w = singular_quadrature_points(region, (0.4, 0.6), gauss_rule(20))
        tensor_pts, tensor_w = region.gauss_points(gauss_rule(20))
        assert_allclose((w * f(pts)).sum(), (tensor_w * f(tensor_pts)).sum(),
                        rtol=1e-12)

    def test_source_outside_region_rejected(self):
        region = IntegrationRegion(0, 0.5, 0, 0.5)
        with pytest.raises(QuadratureError):
            singular_quadrature_points(region, (0.9, 0.9), gauss_rule(4))


class TestQuadtree:
    def test_far_source_leaves_regions_alone(self, flat_patch):
        space = unit_interval_space(2)
        regions = region_partition(space, space)
        refined = quadtree_refine(regions, [0.5, 0.5, 50.0], flat_patch.points_at)
        assert len(refined) == len(regions)

    def test_near_source_splits_and_preserves_area(self, flat_patch):
        space = unit_interval_space(2)
        regions = region_partition(space, space)
        refined = quadtree_refine(regions, [0.5, 0.5, 0.05], flat_patch.points_at)
        assert len(refined) > len(regions)
        assert max(r.depth for r in refined) >= 2
        assert_allclose(sum(r.area for r in refined), 1.0, atol=1e-14)

    def test_depth_cap_warns(self, flat_patch, caplog):
        space = unit_interval_space(1)
        regions = region_partition(space, space)
        with caplog.at_level(logging.WARNING, logger="gibem.quadrature"):
            refined = quadtree_refine(
                regions, [0.5, 0.5, 1e-6], flat_patch.points_at, max_depth=3
            )
        assert max(r.depth for r in refined) == 3
        assert any("depth cap" in rec.message for rec in caplog.records)

    def test_improves_near_singular_integral(self, flat_patch):
        space = unit_interval_space(2)
        mat = Material(1000.0, 0.25)
        src = np.array([0.5, 0.5, 0.05])

        def integrate(regions, order):
            total = np.zeros((3, 3))
            for region in regions:
                params, wts = region.gauss_points(gauss_rule(order))
                fr = flat_patch.frames_at(params)
                tk = kelvin_T_many(src, fr.positions, fr.normals, mat)
                total += np.einsum("m,mij->ij", wts * fr.areas, tk)
            return total

        base = region_partition(space, space)
        reference = integrate([IntegrationRegion(0, 1, 0, 1)], 64)
        coarse_err = np.abs(integrate(base, 8) - reference).max()
        refined = quadtree_refine(base, src, flat_patch.points_at)
        refined_err = np.abs(integrate(refined, 8) - reference).max()
        assert refined_err < coarse_err / 10.0
        assert refined_err < 1e-4
