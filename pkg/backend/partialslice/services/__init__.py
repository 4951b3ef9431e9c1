"""
Numerical Service Layer

This module exposes the generalized partial-slice library: the Clifford
algebra core, stem and slice functions, domains and quadrature, Cauchy
kernels and the integral operators built on them.

The verification suites live in verification_service and are imported
from there directly.
"""

from .base_service import BaseService, ServiceException
from .clifford_core import (
    AlgebraSignature,
    CliffordAlgebra,
    Multivector,
    SplitPoint,
    clifford_conjugate,
    embed_direction,
    embed_point,
    geometric_product,
    norm,
    paravector_inverse,
    reversion,
)
from .domains_quadrature import (
    MirroredBallDomain,
    QuadratureRule,
    SliceQuadrature,
    SphereQuadrature,
    build_boundary_rule,
    build_slice_rules,
    build_sphere_rule,
    build_volume_rule,
    pv_excise,
)
from .integral_ops import IntegralOperatorService, OperatorContext
from .kernels import (
    SurfaceConstants,
    cauchy_kernel_E,
    gps_cauchy_kernel,
    kernel_coefficients,
    weighted_kernel_K,
)
from .stem_slice import (
    SliceFunction,
    StemFunction,
    apply_slice_dirac,
    apply_vartheta,
    cr_residual,
    induce,
    representation_eval,
    representation_residual,
    vartheta_stem,
)

__all__ = [
    'BaseService',
    'ServiceException',
    'AlgebraSignature',
    'CliffordAlgebra',
    'Multivector',
    'SplitPoint',
    'clifford_conjugate',
    'embed_direction',
    'embed_point',
    'geometric_product',
    'norm',
    'paravector_inverse',
    'reversion',
    'MirroredBallDomain',
    'QuadratureRule',
    'SliceQuadrature',
    'SphereQuadrature',
    'build_boundary_rule',
    'build_slice_rules',
    'build_sphere_rule',
    'build_volume_rule',
    'pv_excise',
    'IntegralOperatorService',
    'OperatorContext',
    'SurfaceConstants',
    'cauchy_kernel_E',
    'gps_cauchy_kernel',
    'kernel_coefficients',
    'weighted_kernel_K',
    'SliceFunction',
    'StemFunction',
    'apply_slice_dirac',
    'apply_vartheta',
    'cr_residual',
    'induce',
    'representation_eval',
    'representation_residual',
    'vartheta_stem',
]
