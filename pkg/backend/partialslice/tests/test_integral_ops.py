import math

import numpy as np
from django.test import SimpleTestCase, override_settings

from partialslice.services.base_service import ServiceException
from partialslice.services.catalogue import bump_weighted, constant, default_coefficient, linear, non_slice, x0_squared
from partialslice.services.clifford_core import AlgebraSignature, CliffordAlgebra, Multivector, SplitPoint
from partialslice.services.domains_quadrature import MirroredBallDomain, mesh_spacing
from partialslice.services.integral_ops import IntegralOperatorService, OperatorContext
from partialslice.services.kernels import embed_stem_vectors
from partialslice.services.stem_slice import apply_vartheta, combine, zero_function

SIG = AlgebraSignature(1, 2)
DOMAIN = MirroredBallDomain((0.0, 0.0), 2.0, 1.0)
ALGEBRA = CliffordAlgebra.for_signature(SIG)
ETA = np.array([0.6, 0.8])


def at(offset, eta=ETA):
    stem = DOMAIN.stem_center + np.asarray(offset, dtype=float)
    return SplitPoint.from_slice(SIG, stem[:-1], stem[-1], eta)


def service(level=2, **kwargs):
    return IntegralOperatorService(OperatorContext.build(SIG, DOMAIN, level, sphere_level=2, fd_step=1e-3, **kwargs))


def shifted(x, index, step):
    coordinates = np.array(x.coordinates)
    coordinates[index] += step
    return SplitPoint.from_coordinates(SIG, coordinates)


class OperatorContextTests(SimpleTestCase):

    def test_build(self):
        ctx = OperatorContext.build(SIG, DOMAIN, 2, sphere_level=2)
        self.assertEqual(ctx.level, 2)
        self.assertEqual(ctx.pv_mode, 'polar')
        self.assertAlmostEqual(ctx.pv_epsilon, 2.0 * mesh_spacing(DOMAIN, 2))
        self.assertEqual(ctx.with_pv_mode('excise').pv_mode, 'excise')

    @override_settings(GPS_SPHERE_LEVEL=3, GPS_OPERATOR_FD_STEP=5e-4)
    def test_settings_defaults(self):
        ctx = OperatorContext.build(SIG, DOMAIN, 2)
        self.assertEqual(ctx.fd_step, 5e-4)
        self.assertEqual(len(ctx.sphere_rule), 8)

    def test_rejects_small_pv_radius(self):
        with self.assertRaises(ServiceException) as ctx:
            OperatorContext.build(SIG, DOMAIN, 2, sphere_level=2, pv_factor=1.0)
        self.assertEqual(ctx.exception.code, 'invalid_operator_context')

    def test_rejects_mismatched_domain(self):
        with self.assertRaises(ServiceException) as ctx:
            OperatorContext.build(AlgebraSignature(2, 2), DOMAIN, 2, sphere_level=2)
        self.assertEqual(ctx.exception.code, 'invalid_operator_context')

    def test_rejects_unknown_pv_mode(self):
        with self.assertRaises(ServiceException) as ctx:
            OperatorContext.build(SIG, DOMAIN, 2, sphere_level=2, pv_mode='trapezoid')
        self.assertEqual(ctx.exception.code, 'invalid_operator_context')


class CauchyBoundaryTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.service = service(level=3)

    def test_reproduces_constant(self):
        c = default_coefficient(SIG)
        for offset in ([0.0, 0.0, 0.0], [0.2, -0.1, 0.3]):
            value = self.service.cauchy_boundary_F(constant(SIG), at(offset))
            self.assertLess((value - c).norm() / c.norm(), 1e-4)

    def test_reproduces_linear(self):
        f = linear(SIG)
        x = at([0.1, 0.2, -0.2], eta=np.array([0.0, 1.0]))
        self.assertLess((self.service.cauchy_boundary_F(f, x) - f(x)).norm() / f(x).norm(), 1e-3)

    def test_vanishes_outside(self):
        x = at([0.0, 0.0, 1.8])
        self.assertLess(self.service.cauchy_boundary_F(linear(SIG), x).norm() / linear(SIG)(x).norm(), 1e-3)

    def test_zero_function(self):
        self.assertEqual(self.service.cauchy_boundary_F(zero_function(SIG), at([0.1, 0.0, 0.0])).norm(), 0.0)

    def test_boundary_point_rejected(self):
        with self.assertRaises(ServiceException) as ctx:
            self.service.cauchy_boundary_F(constant(SIG), at([1.0, 0.0, 0.0]))
        self.assertEqual(ctx.exception.code, 'on_boundary')

    def test_axis_point_rejected(self):
        with self.assertRaises(ServiceException) as ctx:
            self.service.cauchy_boundary_F(constant(SIG), SplitPoint(SIG, [0.0, 0.0], [0.0, 0.0]))
        self.assertEqual(ctx.exception.code, 'invalid_point')


class TeodorescuTests(SimpleTestCase):

    def test_ball_transform_of_constant(self):
        ops = service(level=3)
        value = default_coefficient(SIG).coeffs
        for offset, d in (([0.2, -0.1, 0.3], ETA), ([-0.3, 0.2, -0.1], np.array([0.0, -1.0]))):
            z = DOMAIN.stem_center + np.asarray(offset)
            exact = ALGEBRA.product(ALGEBRA.conjugate(embed_stem_vectors(ALGEBRA, np.asarray(offset), d)), value) / SIG.stem_dim
            np.testing.assert_allclose(ops.ball_teodorescu(constant(SIG), z, d).coeffs, exact, atol=1e-6)

    def test_zero_and_linearity(self):
        ops = service()
        x = at([0.1, 0.2, 0.1])
        omega = np.array([1.0, 0.0])
        self.assertEqual(ops.teodorescu_slice(zero_function(SIG), omega, x).norm(), 0.0)
        doubled = ops.teodorescu_full(constant(SIG, default_coefficient(SIG) * 2.0), x)
        self.assertLess((doubled - ops.teodorescu_full(constant(SIG), x) * 2.0).norm(), 1e-12 * doubled.norm())

    def test_paths_agree_in_excise_mode(self):
        ops = service(pv_mode='excise')
        f = x0_squared(SIG)
        for x in (at([0.1, 0.2, 0.1]), at([0.0, 0.0, 1.5])):
            sliced = ops.teodorescu_full(f, x, path='slices')
            direct = ops.teodorescu_full(f, x, path='direct')
            self.assertLess((sliced - direct).norm(), 1e-10 * max(1.0, sliced.norm()))

    def test_unknown_path(self):
        with self.assertRaises(ServiceException):
            service().teodorescu_full(constant(SIG), at([0.1, 0.0, 0.0]), path='spiral')

    def test_radial_derivative_matches_finite_differences(self):
        ops = service()
        f = linear(SIG)
        omega = np.array([0.0, 1.0])
        x = at([0.1, 0.1, 1.6])
        h = 1e-4
        outer = SplitPoint.from_slice(SIG, x.x_p, x.r + h, x.omega)
        inner = SplitPoint.from_slice(SIG, x.x_p, x.r - h, x.omega)
        numeric = (ops.teodorescu_slice(f, omega, outer) - ops.teodorescu_slice(f, omega, inner)) / (2 * h)
        analytic = ops.teodorescu_radial(f, omega, x)
        self.assertLess((analytic - numeric).norm(), 1e-5 * max(1.0, analytic.norm()))

    def test_derivative_index_ranges(self):
        ops = service()
        x = at([0.1, 0.1, 0.1])
        omega = np.array([1.0, 0.0])
        for call, index in ((ops.teodorescu_derivative_p, 2), (ops.teodorescu_derivative_q, 1)):
            with self.assertRaises(ServiceException) as ctx:
                call(constant(SIG), omega, x, index)
            self.assertEqual(ctx.exception.code, 'invalid_point')

    def test_pompeiu_needs_stem(self):
        with self.assertRaises(ServiceException) as ctx:
            service().cauchy_pompeiu_residual(non_slice(SIG), at([0.1, 0.0, 0.0]))
        self.assertEqual(ctx.exception.code, 'invalid_stem')

    def test_pompeiu_residual(self):
        ops = service(level=3)
        for f, tolerance in ((constant(SIG), 1e-3), (x0_squared(SIG), 1e-2)):
            for offset in ([0.1, -0.2, 0.1], [-0.2, 0.3, -0.1]):
                x = at(offset)
                residual = ops.cauchy_pompeiu_residual(f, x, 1e-5)
                self.assertLess(residual / max(1.0, f(x).norm()), tolerance, f"{f.name} at {offset}")


class LeftInverseTests(SimpleTestCase):
    """vartheta-bar T_omega f = 2f and vartheta-bar T f = f."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.service = service(level=3)

    def check_left_inverse(self, f, x, omega):
        ops = self.service
        sliced = ops.as_slice_function(lambda y: ops.teodorescu_slice(f, omega, y), 'T_omega')
        full = ops.as_slice_function(lambda y: ops.teodorescu_full(f, y), 'T')
        scale = max(1.0, f(x).norm())
        self.assertLess((apply_vartheta(sliced, x, 1e-3) - f(x) * 2.0).norm() / (2.0 * scale), 5e-2)
        self.assertLess((apply_vartheta(full, x, 1e-3) - f(x)).norm() / scale, 5e-2)

    def test_constant(self):
        self.check_left_inverse(constant(SIG), at([0.1, -0.2, 0.1]), np.array([1.0, 0.0]))

    def test_x0_squared(self):
        self.check_left_inverse(x0_squared(SIG), at([0.2, 0.1, -0.2]), ETA)


class TeodorescuDerivativeTests(SimpleTestCase):

    def test_closed_forms_match_finite_differences(self):
        ops = service(level=3)
        omega = np.array([0.0, 1.0])
        x = at([0.1, 0.2, 0.1])
        h = 1e-3
        for f in (linear(SIG), x0_squared(SIG)):
            scale = max(1.0, f(x).norm())
            for i in range(SIG.p + SIG.q + 1):
                ahead, behind = shifted(x, i, h), shifted(x, i, -h)
                sliced_fd = (ops.teodorescu_slice(f, omega, ahead) - ops.teodorescu_slice(f, omega, behind)) / (2 * h)
                full_fd = (ops.teodorescu_full(f, ahead) - ops.teodorescu_full(f, behind)) / (2 * h)
                if i <= SIG.p:
                    sliced = ops.teodorescu_derivative_p(f, omega, x, i)
                else:
                    sliced = ops.teodorescu_derivative_q(f, omega, x, i)
                self.assertLess((sliced - sliced_fd).norm() / scale, 1e-3, f"{f.name} slice x_{i}")
                self.assertLess((ops.teodorescu_full_derivative(f, x, i) - full_fd).norm() / scale, 1e-3,
                                f"{f.name} full x_{i}")


class PlemeljTests(SimpleTestCase):

    def test_interior_point_rejected(self):
        with self.assertRaises(ServiceException) as ctx:
            service().plemelj_S(constant(SIG), at([0.2, 0.0, 0.0]))
        self.assertEqual(ctx.exception.code, 'not_on_boundary')

    def test_projections_sum_to_identity(self):
        ops = service()
        x = at([0.0, 0.6, 0.8])
        f = linear(SIG)
        projected, complement = ops.plemelj_projections(f, x)
        self.assertLess((projected + complement - f(x)).norm(), 1e-13 * f(x).norm())

    def test_monogenic_trace_is_fixed(self):
        ops = service(level=3)
        x = at([0.0, 0.6, 0.8])
        f = linear(SIG)
        self.assertLess((ops.plemelj_S(f, x) - f(x)).norm() / f(x).norm(), 5e-2)

    def test_jump_relations(self):
        ops = service(level=3)
        f = linear(SIG)
        x = at([0.0, 0.6, 0.8])
        scale = max(1.0, f(x).norm())
        for side in ('interior', 'exterior'):
            limit, target = ops.plemelj_jump(f, x, side=side)
            self.assertLess((limit - target).norm() / scale, 5e-2, side)

    def test_jump_argument_checks(self):
        ops = service()
        x = at([0.0, 0.6, 0.8])
        with self.assertRaises(ServiceException):
            ops.plemelj_jump(linear(SIG), x, side='sideways')
        with self.assertRaises(ServiceException):
            ops.plemelj_jump(linear(SIG), x, path_steps=1)


class PlemeljCompositionTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.service = service(level=3)
        cls.u = x0_squared(SIG)
        cls.image = cls.service.plemelj_image(cls.u)
        cls.projected_u = combine([(0.5, cls.u), (0.5, cls.image)])
        cls.complement_u = combine([(0.5, cls.u), (-0.5, cls.image)])
        cls.x = at([0.6, 0.0, 0.8])
        cls.scale = max(1.0, cls.u(cls.x).norm())

    def assertSmall(self, value, tolerance=5e-2):
        self.assertLess(value.norm() / self.scale, tolerance)

    def test_s_squared_is_identity(self):
        self.assertSmall(self.service.plemelj_S(self.image, self.x) - self.u(self.x))

    def test_p_plus_q_is_identity(self):
        ops = self.service
        self.assertSmall(ops.plemelj_P(self.u, self.x) + ops.plemelj_Q(self.u, self.x) - self.u(self.x), 1e-13)

    def test_p_and_q_are_idempotent(self):
        ops = self.service
        self.assertSmall(ops.plemelj_P(self.projected_u, self.x) - ops.plemelj_P(self.u, self.x))
        self.assertSmall(ops.plemelj_Q(self.complement_u, self.x) - ops.plemelj_Q(self.u, self.x))

    def test_p_and_q_annihilate_each_other(self):
        self.assertSmall(self.service.plemelj_P(self.complement_u, self.x))
        self.assertSmall(self.service.plemelj_Q(self.projected_u, self.x))


class FunctionSpaceTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.service = service()

    def test_norm_of_one_is_volume_root(self):
        one = constant(SIG, Multivector.scalar(SIG, 1.0))
        volume = DOMAIN.completion_volume(SIG.q)
        for t in (2.0, 3.0):
            self.assertAlmostEqual(self.service.lt_norm(one, t), volume ** (1.0 / t), delta=1e-10 * volume)

    def test_exponent_must_exceed_one(self):
        for t in (1.0, 0.5):
            with self.assertRaises(ServiceException) as ctx:
                self.service.lt_norm(linear(SIG), t)
            self.assertEqual(ctx.exception.code, 'invalid_exponent')

    def test_inner_product_laws(self):
        f, g = linear(SIG), x0_squared(SIG)
        squared = self.service.inner_product(f, f)
        self.assertAlmostEqual(math.sqrt(squared.scalar_part), self.service.lt_norm(f, 2.0), places=10)
        pair = self.service.inner_product(f, g)
        self.assertLess((pair - self.service.inner_product(g, f).conjugate()).norm(), 1e-10 * max(1.0, pair.norm()))

    def test_hodge_rejects_interior_point(self):
        g = bump_weighted(constant(SIG), DOMAIN)
        with self.assertRaises(ServiceException) as ctx:
            self.service.hodge_orthogonality_residual(at([0.2, 0.1, 0.1]), g)
        self.assertEqual(ctx.exception.code, 'not_exterior')

    def test_hodge_rejects_degenerate_function(self):
        g = bump_weighted(zero_function(SIG), DOMAIN)
        with self.assertRaises(ServiceException) as ctx:
            self.service.hodge_orthogonality_residual(at([0.0, 0.0, 1.6]), g)
        self.assertEqual(ctx.exception.code, 'degenerate_function')

    def test_hodge_residual_is_small_outside(self):
        g = bump_weighted(linear(SIG), DOMAIN)
        residual = service(level=3).hodge_orthogonality_residual(at([0.0, 0.0, 1.6]), g)
        self.assertLess(residual, 5e-2)

    def test_hodge_interior_point_is_not_orthogonal(self):
        ops = service(level=3)
        g = bump_weighted(constant(SIG), DOMAIN)
        eta = np.ones(SIG.q) / math.sqrt(SIG.q)
        outside = ops.hodge_orthogonality_residual(at([0.0, 0.0, 1.6], eta), g)
        inside = ops.hodge_orthogonality_residual(at([0.2, 0.1, 0.1], eta), g, allow_interior=True)
        self.assertGreater(inside, 10.0 * outside)

    def test_hodge_rejects_non_slice(self):
        with self.assertRaises(ServiceException) as ctx:
            self.service.hodge_orthogonality_residual(at([0.0, 0.0, 1.6]), non_slice(SIG))
        self.assertEqual(ctx.exception.code, 'invalid_stem')

    def test_operator_norm_of_zero_is_undefined(self):
        with self.assertRaises(ServiceException) as ctx:
            self.service.operator_norm_ratio(zero_function(SIG), level=1)
        self.assertEqual(ctx.exception.code, 'degenerate_function')
