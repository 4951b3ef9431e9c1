import math

import numpy as np
from django.test import SimpleTestCase

from partialslice.services.base_service import ServiceException
from partialslice.services.clifford_core import AlgebraSignature, SplitPoint
from partialslice.services.domains_quadrature import (
    MirroredBallDomain,
    build_boundary_rule,
    build_centered_volume_rule,
    build_pole_boundary_rule,
    build_slice_rules,
    build_sphere_rule,
    build_volume_rule,
    mesh_spacing,
    pv_excise,
)

SIG = AlgebraSignature(1, 2)
DOMAIN = MirroredBallDomain((0.0, 0.0), 2.0, 1.0)


class MirroredBallDomainTests(SimpleTestCase):

    def test_rejects_touching_axis(self):
        for r0, rho in [(1.0, 1.0), (0.5, 1.0), (2.0, 0.0)]:
            with self.assertRaises(ServiceException) as ctx:
                MirroredBallDomain((0.0, 0.0), r0, rho)
            self.assertEqual(ctx.exception.code, 'invalid_domain')
        with self.assertRaises(ServiceException) as ctx:
            MirroredBallDomain((0.0, 0.0), 1.0, 1.0)
        self.assertIn('r0 > rho', ctx.exception.message)

    def test_contains(self):
        centre = SplitPoint.from_slice(SIG, [0.0, 0.0], 2.0, [0.0, 1.0])
        self.assertTrue(DOMAIN.contains(centre))
        for angle in np.linspace(0, 2 * np.pi, 7):
            self.assertTrue(DOMAIN.contains(SplitPoint.from_slice(SIG, [0.0, 0.0], 2.0, [np.cos(angle), np.sin(angle)])))
        self.assertFalse(DOMAIN.contains(SplitPoint.from_slice(SIG, [0.0, 0.0], 0.5, [1.0, 0.0])))

    def test_slice_contains_is_mirrored(self):
        x_p = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.0]])
        inside = DOMAIN.slice_contains(x_p, np.array([2.0, -2.2, 0.9]))
        self.assertEqual(inside.tolist(), [True, True, False])

    def test_boundary_helpers(self):
        self.assertAlmostEqual(DOMAIN.boundary_gap([0.0, 0.0, 2.5]), 0.5)
        np.testing.assert_allclose(DOMAIN.project_to_boundary([0.0, 0.5, 2.0]), [0.0, 1.0, 2.0])
        with self.assertRaises(ServiceException):
            DOMAIN.project_to_boundary(DOMAIN.stem_center)
        self.assertEqual(DOMAIN.radial_gap, 1.0)

    def test_completion_volume_pappus(self):
        expected = 2 * math.pi * 2.0 * (4.0 / 3.0) * math.pi
        self.assertAlmostEqual(DOMAIN.completion_volume(2), expected, delta=1e-12 * expected)

    def test_completion_volume_general_q(self):
        # q = 3: sigma_2 * int_B r^2 dy = 4 pi (r0^2 |B| + rho^2 |B| / 5) in R^3
        ball = 4.0 / 3.0 * math.pi
        expected = 4 * math.pi * (4.0 * ball + ball / 5.0)
        self.assertAlmostEqual(DOMAIN.completion_volume(3), expected, delta=1e-12 * expected)


class SliceRuleTests(SimpleTestCase):

    def test_boundary_area(self):
        rule = build_boundary_rule(DOMAIN, 4)
        self.assertAlmostEqual(rule.boundary.total_weight, 4 * math.pi, delta=1e-3 * 4 * math.pi)
        np.testing.assert_allclose(np.linalg.norm(rule.boundary_normals, axis=1), 1.0)

    def test_volume(self):
        rule = build_volume_rule(DOMAIN, 4)
        expected = 4.0 / 3.0 * math.pi
        self.assertAlmostEqual(rule.volume.total_weight, expected, delta=1e-3 * expected)
        offsets = np.linalg.norm(rule.volume_nodes - DOMAIN.stem_center, axis=1)
        self.assertTrue(np.all(offsets < DOMAIN.rho))

    def test_rule_sizes(self):
        rules = build_slice_rules(DOMAIN, 2)
        self.assertEqual(len(rules.boundary), 4 * 8)
        self.assertEqual(len(rules.volume), 4 * 8 * 4)
        self.assertAlmostEqual(rules.mesh_spacing, mesh_spacing(DOMAIN, 2))
        self.assertAlmostEqual(mesh_spacing(DOMAIN, 2), math.pi / 4)

    def test_negative_level(self):
        with self.assertRaises(ServiceException) as ctx:
            build_volume_rule(DOMAIN, -1)
        self.assertEqual(ctx.exception.code, 'invalid_level')

    def test_moments_of_last_coordinate(self):
        rule = build_volume_rule(DOMAIN, 3).volume
        self.assertAlmostEqual(rule.integrate(rule.nodes[:, -1]), 2.0 * 4.0 / 3.0 * math.pi, places=10)

    def test_full_space_reconstruction(self):
        volume = build_volume_rule(DOMAIN, 4).volume
        sphere = build_sphere_rule(2, 4)
        radial = volume.integrate(np.abs(volume.nodes[:, -1]) ** (SIG.q - 1))
        total = 2.0 * sphere.total_weight * radial
        expected = DOMAIN.completion_volume(SIG.q)
        self.assertAlmostEqual(total, expected, delta=1e-2 * expected)


class SphereRuleTests(SimpleTestCase):

    def test_half_circle(self):
        rule = build_sphere_rule(2, 3)
        self.assertAlmostEqual(rule.total_weight, math.pi, delta=1e-10)
        self.assertEqual(len(rule), 8)
        self.assertTrue(np.all(rule.nodes[:, 1] > 0))

    def test_rotated_half_circle(self):
        rule = build_sphere_rule(2, 3, rotation=0.37)
        self.assertAlmostEqual(rule.total_weight, math.pi, delta=1e-10)
        np.testing.assert_allclose(np.linalg.norm(rule.nodes, axis=1), 1.0)

    def test_hemisphere_q3(self):
        rule = build_sphere_rule(3, 3)
        self.assertAlmostEqual(rule.total_weight, 2 * math.pi, delta=1e-6 * 2 * math.pi)
        self.assertTrue(np.all(rule.nodes[:, 2] > 0))
        other_axis = build_sphere_rule(3, 3, axis=0)
        self.assertTrue(np.all(other_axis.nodes[:, 0] > 0))

    def test_unsupported(self):
        with self.assertRaises(ServiceException) as ctx:
            build_sphere_rule(1, 2)
        self.assertEqual(ctx.exception.code, 'unsupported_sphere')


class PrincipalValueTests(SimpleTestCase):

    def test_zero_radius_keeps_rule(self):
        rule = build_volume_rule(DOMAIN, 2).volume
        self.assertIs(pv_excise(rule, DOMAIN.stem_center, DOMAIN.stem_center, 0.0), rule)

    def test_far_singular_points_keep_nodes(self):
        rule = build_slice_rules(DOMAIN, 2)
        excised = pv_excise(rule, [10.0, 0.0, 2.0], [10.0, 0.0, -2.0], 0.5)
        self.assertEqual(len(excised.volume), len(rule.volume))
        self.assertEqual(len(excised.boundary), len(rule.boundary))

    def test_nodes_dropped_near_point(self):
        rule = build_volume_rule(DOMAIN, 3).volume
        excised = pv_excise(rule, DOMAIN.stem_center, -DOMAIN.stem_center, 0.3)
        self.assertLess(len(excised), len(rule))
        self.assertTrue(np.all(np.linalg.norm(excised.nodes - DOMAIN.stem_center, axis=1) >= 0.3))

    def test_empty_and_negative(self):
        rule = build_volume_rule(DOMAIN, 2).volume
        with self.assertRaises(ServiceException) as ctx:
            pv_excise(rule, DOMAIN.stem_center, DOMAIN.stem_center, 5.0)
        self.assertEqual(ctx.exception.code, 'empty_rule')
        with self.assertRaises(ServiceException):
            pv_excise(rule, DOMAIN.stem_center, DOMAIN.stem_center, -1.0)


class CentredRuleTests(SimpleTestCase):

    def test_centred_rule_integrates_ball(self):
        centre = DOMAIN.stem_center + np.array([0.3, -0.2, 0.4])
        rule = build_centered_volume_rule(DOMAIN, centre, 4)
        weights = rule.volume_weights()
        self.assertAlmostEqual(float(np.sum(weights)), 4.0 / 3.0 * math.pi, places=8)
        points = rule.points()
        last = float(np.sum(weights * points[..., -1]))
        self.assertAlmostEqual(last, 2.0 * 4.0 / 3.0 * math.pi, places=8)

    def test_centred_rule_needs_interior(self):
        with self.assertRaises(ServiceException) as ctx:
            build_centered_volume_rule(DOMAIN, [0.0, 0.0, 3.5], 2)
        self.assertEqual(ctx.exception.code, 'not_interior')

    def test_pole_rule(self):
        pole = DOMAIN.project_to_boundary([0.4, 0.1, 2.3])
        rule = build_pole_boundary_rule(DOMAIN, pole, 3)
        self.assertAlmostEqual(rule.total_weight, 4 * math.pi, places=8)
        np.testing.assert_allclose(np.linalg.norm(rule.nodes - DOMAIN.stem_center, axis=1), 1.0)
