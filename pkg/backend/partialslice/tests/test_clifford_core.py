import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from partialslice.services.base_service import ServiceException
from partialslice.services.clifford_core import (
    AlgebraSignature,
    CliffordAlgebra,
    Multivector,
    SplitPoint,
    clifford_conjugate,
    embed_point,
    geometric_product,
    norm,
    paravector_inverse,
    reversion,
)

SIG = AlgebraSignature(1, 2)
finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
coefficients = arrays(np.float64, SIG.dim, elements=finite)


def e(*indices):
    return Multivector.basis(SIG, *indices)


class GeneratorRelationTests(SimpleTestCase):

    def test_square_of_generator_is_minus_one(self):
        self.assertTrue((e(1) * e(1)).allclose(-1.0, atol=0.0))

    def test_generators_anticommute(self):
        self.assertTrue((e(1) * e(2)).allclose(e(1, 2), atol=0.0))
        self.assertTrue((e(2) * e(1)).allclose(-e(1, 2), atol=0.0))

    def test_bivector_product_sign(self):
        self.assertTrue(geometric_product(e(1, 2), e(2, 3)).allclose(-e(1, 3), atol=0.0))

    def test_all_pairs_exact(self):
        for i in range(1, SIG.n + 1):
            for j in range(1, SIG.n + 1):
                expected = -2.0 if i == j else 0.0
                self.assertTrue((e(i) * e(j) + e(j) * e(i)).allclose(expected, atol=0.0))

    def test_large_signature_without_tables(self):
        sig = AlgebraSignature(4, 5)
        a = Multivector.basis(sig, 1, 9)
        self.assertTrue((a * a).allclose(-1.0, atol=0.0))

    def test_signature_mismatch(self):
        with self.assertRaises(ServiceException) as ctx:
            geometric_product(e(1), Multivector.basis(AlgebraSignature(2, 2), 1))
        self.assertEqual(ctx.exception.code, 'signature_mismatch')

    def test_invalid_signatures(self):
        for p, q in [(0, 2), (1, 1), (6, 7)]:
            with self.assertRaises(ServiceException) as ctx:
                AlgebraSignature(p, q)
            self.assertEqual(ctx.exception.code, 'invalid_signature')

    def test_blade_index_out_of_range(self):
        with self.assertRaises(ServiceException) as ctx:
            e(4)
        self.assertEqual(ctx.exception.code, 'invalid_blade')


class InvolutionTests(SimpleTestCase):

    def test_conjugation_examples(self):
        self.assertTrue(clifford_conjugate(Multivector.scalar(SIG, 1.0)).allclose(1.0, atol=0.0))
        self.assertTrue(clifford_conjugate(e(1)).allclose(-e(1), atol=0.0))
        self.assertTrue(clifford_conjugate(e(1, 2)).allclose(-e(1, 2), atol=0.0))

    def test_reversion_examples(self):
        self.assertTrue(reversion(e(1)).allclose(e(1), atol=0.0))
        self.assertTrue(reversion(e(1, 2)).allclose(-e(1, 2), atol=0.0))

    @given(coefficients, coefficients)
    @settings(max_examples=100, deadline=None)
    def test_anti_automorphisms(self, a, b):
        a, b = Multivector(SIG, a), Multivector(SIG, b)
        scale = max(1.0, a.norm() * b.norm())
        self.assertLess((reversion(a * b) - reversion(b) * reversion(a)).norm(), 1e-12 * scale)
        self.assertLess((clifford_conjugate(a * b) - clifford_conjugate(b) * clifford_conjugate(a)).norm(), 1e-12 * scale)
        self.assertLess(((a * b).involute() - a.involute() * b.involute()).norm(), 1e-12 * scale)

    @given(coefficients, coefficients, coefficients)
    @settings(max_examples=50, deadline=None)
    def test_associativity(self, a, b, c):
        a, b, c = Multivector(SIG, a), Multivector(SIG, b), Multivector(SIG, c)
        scale = max(1.0, a.norm() * b.norm() * c.norm())
        self.assertLess(((a * b) * c - a * (b * c)).norm(), 1e-12 * scale)


class NormTests(SimpleTestCase):

    def test_examples(self):
        self.assertAlmostEqual(norm(1.0 + e(1)), math.sqrt(2.0), places=15)
        self.assertEqual(norm(e(1, 2)), 1.0)

    @given(coefficients)
    @settings(max_examples=100, deadline=None)
    def test_norm_identity(self, a):
        a = Multivector(SIG, a)
        squared = float(np.sum(a.coeffs ** 2))
        self.assertLessEqual(abs((a * a.conjugate()).scalar_part - squared), 1e-12 * max(1.0, squared))

    def test_non_finite_coefficients_rejected(self):
        coeffs = np.zeros(SIG.dim)
        coeffs[3] = np.nan
        with self.assertRaises(ServiceException) as ctx:
            Multivector(SIG, coeffs)
        self.assertEqual(ctx.exception.code, 'invalid_multivector')


class ParavectorInverseTests(SimpleTestCase):

    def test_examples(self):
        self.assertTrue(paravector_inverse(1.0 + e(1)).allclose((1.0 - e(1)) * 0.5))
        self.assertTrue(paravector_inverse(e(2)).allclose(-e(2)))

    def test_random_paravectors(self):
        rng = np.random.default_rng(7)
        for coords in rng.standard_normal((100, SIG.n + 1)):
            x = Multivector.from_paravector(SIG, coords)
            self.assertLess((x * paravector_inverse(x) - 1.0).norm(), 1e-12)

    def test_zero_rejected(self):
        with self.assertRaises(ServiceException) as ctx:
            paravector_inverse(Multivector.zero(SIG))
        self.assertEqual(ctx.exception.code, 'zero_paravector')

    def test_bivector_rejected(self):
        with self.assertRaises(ServiceException) as ctx:
            paravector_inverse(1.0 + e(1, 2))
        self.assertEqual(ctx.exception.code, 'not_paravector')


class SplitPointTests(SimpleTestCase):

    def test_embed_point(self):
        self.assertTrue(embed_point(SplitPoint(SIG, [0, 0], [0, 0])).allclose(0.0, atol=0.0))
        self.assertTrue(embed_point(SplitPoint(SIG, [1, 2], [0, 0])).allclose(1.0 + 2.0 * e(1), atol=0.0))

    def test_radius_and_direction(self):
        x = SplitPoint(SIG, [0.5, -1.0], [3.0, 4.0])
        self.assertAlmostEqual(x.r, 5.0, delta=5e-14)
        np.testing.assert_allclose(x.omega, [0.6, 0.8], atol=1e-15)
        np.testing.assert_allclose(x.stem, [0.5, -1.0, 5.0])

    def test_axis_point_has_no_direction(self):
        self.assertIsNone(SplitPoint(SIG, [1.0, 0.0], [0.0, 0.0]).omega)

    def test_from_slice_requires_unit_direction(self):
        with self.assertRaises(ServiceException) as ctx:
            SplitPoint.from_slice(SIG, [0, 0], 1.0, [1.0, 1.0])
        self.assertEqual(ctx.exception.code, 'invalid_point')

    def test_wrong_shape(self):
        with self.assertRaises(ServiceException):
            SplitPoint(SIG, [0, 0, 0], [1, 0])

    def test_algebra_is_cached(self):
        self.assertIs(CliffordAlgebra.for_signature(SIG), CliffordAlgebra.for_signature(AlgebraSignature(1, 2)))
