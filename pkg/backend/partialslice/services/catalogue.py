"""
Function Catalogue

This module provides the test functions the verification suites run on:
- GPS-monogenic members: constant c, (x_0 + x_q)c, (x_0 + x_q)^2 and a
  kernel section x -> E_{y*}(x) with y* outside the closed domain
- Non-monogenic members with known vartheta-bar: x_0^2 and |x_q|^2
- Bump-weighted members b*f vanishing on the domain boundary
- The raw non-slice function x_1 * x_{p+1}
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .base_service import ServiceException
from .clifford_core import AlgebraSignature, CliffordAlgebra, Multivector
from .domains_quadrature import MirroredBallDomain
from .kernels import slice_kernel
from .stem_slice import SliceFunction, StemFunction

logger = logging.getLogger(__name__)

SECTION_OFFSET = 1.5


@dataclass(frozen=True, eq=False)
class CatalogueEntry:
    """A catalogue function with what is known about it."""

    name: str
    function: SliceFunction
    monogenic: bool
    vartheta: Optional[SliceFunction] = None
    vanishes_on_boundary: bool = False


def default_coefficient(signature: AlgebraSignature) -> Multivector:
    """Fixed non-paravector constant 1 + e_1/2 - e_{p+1}/4 + e_1 e_{p+1}/8."""
    p1 = signature.p + 1
    return (
        Multivector.scalar(signature, 1.0)
        + 0.5 * Multivector.basis(signature, 1)
        - 0.25 * Multivector.basis(signature, p1)
        + 0.125 * Multivector.basis(signature, 1, p1)
    )


def _tile(coefficient: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return weights[..., None] * coefficient


def constant(signature: AlgebraSignature, c: Optional[Multivector] = None) -> SliceFunction:
    c = default_coefficient(signature) if c is None else c
    value = c.coeffs
    dim = signature.dim
    p1 = signature.p + 1
    stem = StemFunction(
        signature,
        f1=lambda x_p, r: np.broadcast_to(value, (len(r), dim)),
        f2=lambda x_p, r: np.zeros((len(r), dim)),
        d_xp1=lambda x_p, r: np.zeros((len(r), p1, dim)),
        d_xp2=lambda x_p, r: np.zeros((len(r), p1, dim)),
        d_r1=lambda x_p, r: np.zeros((len(r), dim)),
        d_r2=lambda x_p, r: np.zeros((len(r), dim)),
        name='constant',
    )
    return SliceFunction(signature, stem=stem, name='constant')


def linear(signature: AlgebraSignature, c: Optional[Multivector] = None) -> SliceFunction:
    """(x_0 + x_q)c, stem (x_0 c, r c)."""
    c = default_coefficient(signature) if c is None else c
    value = c.coeffs
    dim = signature.dim
    p1 = signature.p + 1

    def d_xp1(x_p, r):
        out = np.zeros((len(r), p1, dim))
        out[:, 0, :] = value
        return out

    stem = StemFunction(
        signature,
        f1=lambda x_p, r: _tile(value, x_p[:, 0]),
        f2=lambda x_p, r: _tile(value, r),
        d_xp1=d_xp1,
        d_xp2=lambda x_p, r: np.zeros((len(r), p1, dim)),
        d_r1=lambda x_p, r: np.zeros((len(r), dim)),
        d_r2=lambda x_p, r: np.broadcast_to(value, (len(r), dim)),
        name='linear',
    )
    return SliceFunction(signature, stem=stem, name='linear')


def square(signature: AlgebraSignature) -> SliceFunction:
    """(x_0 + x_q)^2, stem (x_0^2 - r^2, 2 x_0 r)."""
    unit = CliffordAlgebra.for_signature(signature).scalar(1.0)
    dim = signature.dim
    p1 = signature.p + 1

    def d_xp(weights):
        def partial(x_p, r):
            out = np.zeros((len(r), p1, dim))
            out[:, 0, :] = _tile(unit, weights(x_p, r))
            return out
        return partial

    stem = StemFunction(
        signature,
        f1=lambda x_p, r: _tile(unit, x_p[:, 0] ** 2 - r ** 2),
        f2=lambda x_p, r: _tile(unit, 2 * x_p[:, 0] * r),
        d_xp1=d_xp(lambda x_p, r: 2 * x_p[:, 0]),
        d_xp2=d_xp(lambda x_p, r: 2 * r),
        d_r1=lambda x_p, r: _tile(unit, -2 * r),
        d_r2=lambda x_p, r: _tile(unit, 2 * x_p[:, 0]),
        name='square',
    )
    return SliceFunction(signature, stem=stem, name='square')


def x0_squared(signature: AlgebraSignature) -> SliceFunction:
    """x_0^2; vartheta-bar gives 2 x_0."""
    unit = CliffordAlgebra.for_signature(signature).scalar(1.0)
    dim = signature.dim
    p1 = signature.p + 1

    def d_xp1(x_p, r):
        out = np.zeros((len(r), p1, dim))
        out[:, 0, :] = _tile(unit, 2 * x_p[:, 0])
        return out

    stem = StemFunction(
        signature,
        f1=lambda x_p, r: _tile(unit, x_p[:, 0] ** 2),
        f2=lambda x_p, r: np.zeros((len(r), dim)),
        d_xp1=d_xp1,
        d_xp2=lambda x_p, r: np.zeros((len(r), p1, dim)),
        d_r1=lambda x_p, r: np.zeros((len(r), dim)),
        d_r2=lambda x_p, r: np.zeros((len(r), dim)),
        name='x0_squared',
    )
    return SliceFunction(signature, stem=stem, name='x0_squared')


def r_squared(signature: AlgebraSignature) -> SliceFunction:
    """|x_q|^2; vartheta-bar gives 2 x_q."""
    unit = CliffordAlgebra.for_signature(signature).scalar(1.0)
    dim = signature.dim
    p1 = signature.p + 1
    stem = StemFunction(
        signature,
        f1=lambda x_p, r: _tile(unit, r ** 2),
        f2=lambda x_p, r: np.zeros((len(r), dim)),
        d_xp1=lambda x_p, r: np.zeros((len(r), p1, dim)),
        d_xp2=lambda x_p, r: np.zeros((len(r), p1, dim)),
        d_r1=lambda x_p, r: _tile(unit, 2 * r),
        d_r2=lambda x_p, r: np.zeros((len(r), dim)),
        name='r_squared',
    )
    return SliceFunction(signature, stem=stem, name='r_squared')


def _scaled(signature: AlgebraSignature, scale: float, name: str, radial: bool) -> SliceFunction:
    """scale*x_q (stem (0, scale*r)) when radial, else scale*x_0."""
    unit = CliffordAlgebra.for_signature(signature).scalar(1.0)
    dim = signature.dim
    if radial:
        stem = StemFunction(
            signature,
            f1=lambda x_p, r: np.zeros((len(r), dim)),
            f2=lambda x_p, r: _tile(unit, scale * r),
            name=name,
        )
    else:
        stem = StemFunction(
            signature,
            f1=lambda x_p, r: _tile(unit, scale * x_p[:, 0]),
            f2=lambda x_p, r: np.zeros((len(r), dim)),
            name=name,
        )
    return SliceFunction(signature, stem=stem, name=name)


def section_pole(domain: MirroredBallDomain) -> np.ndarray:
    """Stem point (c_p, r0 + 1.5 rho) of the kernel section's pole, outside the closed domain."""
    return np.array(domain.center_p + (domain.r0 + SECTION_OFFSET * domain.rho,))


def kernel_section(signature: AlgebraSignature, domain: MirroredBallDomain, direction=None) -> SliceFunction:
    """
    x -> E_{y*}(x) for y* = y*_p + t* direction.

    Stem (E+ + E-)/2, direction (E- - E+)/2 with E+- = E(y* - x_{+-direction}).
    """
    algebra = CliffordAlgebra.for_signature(signature)
    if direction is None:
        direction = np.zeros(signature.q)
        direction[-1] = 1.0
    direction = np.asarray(direction, dtype=float)
    pole = section_pole(domain)
    sphere = algebra.embed_sphere(direction)

    def kernels(x_p, r):
        near = pole - np.append(x_p, r[:, None], axis=1)
        far = pole - np.append(x_p, -r[:, None], axis=1)
        return slice_kernel(algebra, near, direction), slice_kernel(algebra, far, direction)

    def f1(x_p, r):
        near, far = kernels(x_p, r)
        return 0.5 * (near + far)

    def f2(x_p, r):
        near, far = kernels(x_p, r)
        return 0.5 * algebra.product(sphere, far - near)

    stem = StemFunction(signature, f1=f1, f2=f2, name='kernel_section')
    return SliceFunction(signature, stem=stem, name='kernel_section')


def bump_weighted(f: SliceFunction, domain: MirroredBallDomain) -> SliceFunction:
    """
    b*f with b = (rho^2 - |x_p - c_p|^2 - (|r| - r0)^2)^2, zero on the boundary.

    Raises:
        ServiceException: If f is raw
    """
    if f.kind != 'stem':
        raise ServiceException(message="Bump weighting needs a stem-induced function", code='invalid_stem')
    F = f.stem
    center = np.asarray(domain.center_p)

    def inner(x_p, r):
        return domain.rho ** 2 - np.sum((x_p - center) ** 2, axis=1) - (np.abs(r) - domain.r0) ** 2

    def bump(x_p, r):
        return inner(x_p, r) ** 2

    def bump_xp(x_p, r):
        return -4.0 * inner(x_p, r)[:, None] * (x_p - center)

    def bump_r(x_p, r):
        return -4.0 * inner(x_p, r) * (np.abs(r) - domain.r0) * np.sign(r)

    def times(base):
        return lambda x_p, r: bump(x_p, r)[:, None] * np.asarray(base(x_p, r), dtype=float)

    d_xp1 = d_xp2 = d_r1 = d_r2 = None
    if F.has_derivatives:
        def d_xp(index):
            def partial(x_p, r):
                value = F.values(x_p, r)[index]
                base = np.asarray((F.d_xp1, F.d_xp2)[index](x_p, r), dtype=float)
                return bump_xp(x_p, r)[:, :, None] * value[:, None, :] + bump(x_p, r)[:, None, None] * base
            return partial

        def d_r(index):
            def partial(x_p, r):
                value = F.values(x_p, r)[index]
                base = np.asarray((F.d_r1, F.d_r2)[index](x_p, r), dtype=float)
                return bump_r(x_p, r)[:, None] * value + bump(x_p, r)[:, None] * base
            return partial

        d_xp1, d_xp2, d_r1, d_r2 = d_xp(0), d_xp(1), d_r(0), d_r(1)

    name = f"bump*{f.name}"
    stem = StemFunction(
        f.signature, times(F.f1), times(F.f2),
        d_xp1, d_xp2, d_r1, d_r2,
        domain_hint=domain,
        name=name,
    )
    return SliceFunction(f.signature, stem=stem, name=name)


def non_slice(signature: AlgebraSignature) -> SliceFunction:
    """Raw x_1 * x_{p+1}; not of the form F1 + omega F2."""
    algebra = CliffordAlgebra.for_signature(signature)
    unit = algebra.scalar(1.0)
    p1 = signature.p + 1
    return SliceFunction(
        signature,
        raw=lambda points: _tile(unit, points[:, 1] * points[:, p1]),
        name='non_slice',
    )


def build_catalogue(signature: AlgebraSignature, domain: MirroredBallDomain) -> Dict[str, CatalogueEntry]:
    """All catalogue entries for one signature and domain, keyed by name."""
    if domain.p != signature.p:
        raise ServiceException(message="Domain and signature disagree on p", code='signature_mismatch')
    entries = [
        CatalogueEntry('constant', constant(signature), monogenic=True),
        CatalogueEntry('linear', linear(signature), monogenic=True),
        CatalogueEntry('square', square(signature), monogenic=True),
        CatalogueEntry('kernel_section', kernel_section(signature, domain), monogenic=True),
        CatalogueEntry(
            'x0_squared', x0_squared(signature), monogenic=False,
            vartheta=_scaled(signature, 2.0, '2*x0', radial=False),
        ),
        CatalogueEntry(
            'r_squared', r_squared(signature), monogenic=False,
            vartheta=_scaled(signature, 2.0, '2*x_q', radial=True),
        ),
        CatalogueEntry('bump', bump_weighted(constant(signature), domain), monogenic=False, vanishes_on_boundary=True),
        CatalogueEntry('bump_linear', bump_weighted(linear(signature), domain), monogenic=False, vanishes_on_boundary=True),
        CatalogueEntry('non_slice', non_slice(signature), monogenic=False),
    ]
    logger.debug(f"Catalogue for {signature}: {[entry.name for entry in entries]}")
    return {entry.name: entry for entry in entries}


def monogenic_entries(catalogue: Dict[str, CatalogueEntry]) -> List[CatalogueEntry]:
    return [entry for entry in catalogue.values() if entry.monogenic]


def stem_entries(catalogue: Dict[str, CatalogueEntry]) -> List[CatalogueEntry]:
    return [entry for entry in catalogue.values() if entry.function.kind == 'stem']
