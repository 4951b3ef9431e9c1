"""
Stem and Slice Functions

This module provides generalized partial-slice functions induced from stem
functions on R^{p+2}:
- StemFunction (F1, F2) with the even-odd condition in r
- SliceFunction, stem-induced f = F1 + omega F2 or a raw evaluable map
- The representation formula and its residual
- The operators vartheta-bar = D_{x_p} + (x_q/|x_q|^2) E_{x_q} and D_omega
- Cauchy-Riemann residuals of a stem and the radially weighted stem |r|^s F

Every evaluator is batched: stems take x_p of shape (N, p+1) and r of shape
(N,) and return coefficient arrays of shape (N, 2^n).
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .base_service import ServiceException
from .clifford_core import AlgebraSignature, CliffordAlgebra, Multivector, SplitPoint

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1e-5

StemMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


class StemDomain(Protocol):
    """Region of validity of a stem, as exposed by MirroredBallDomain."""

    radial_gap: float

    def slice_contains(self, x_p: np.ndarray, r: np.ndarray) -> np.ndarray:
        ...


def _as_batch(x_p, r) -> Tuple[np.ndarray, np.ndarray]:
    x_p = np.atleast_2d(np.asarray(x_p, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return x_p, r


def _generators(algebra: CliffordAlgebra, indices: Sequence[int]) -> np.ndarray:
    """Coefficient arrays of e_i for the given coordinate indices (e_0 = 1)."""
    out = np.zeros((len(indices), algebra.dim))
    out[np.arange(len(indices)), algebra.generator_index[list(indices)]] = 1.0
    return out


def dirac_p(algebra: CliffordAlgebra, partials: np.ndarray, conjugate: bool = False) -> np.ndarray:
    """
    Combine partial derivatives (N, p+1, dim) into D_{x_p} = sum e_i d_i.

    With conjugate=True the paravector conjugate d_0 - sum_{i>=1} e_i d_i is used.
    """
    p1 = partials.shape[-2]
    out = partials[..., 0, :].copy()
    units = _generators(algebra, range(1, p1))
    sign = -1.0 if conjugate else 1.0
    for k in range(1, p1):
        out += sign * algebra.product(units[k - 1], partials[..., k, :])
    return out


@dataclass(frozen=True, eq=False)
class StemFunction:
    """
    Pair (F1, F2) on a region of R^{p+2}.

    Optional analytic partials: d_xp1/d_xp2 return (N, p+1, dim) arrays of
    dF/dx_i, d_r1/d_r2 return (N, dim) arrays of dF/dr.
    """

    signature: AlgebraSignature
    f1: StemMap
    f2: StemMap
    d_xp1: Optional[Callable] = None
    d_xp2: Optional[Callable] = None
    d_r1: Optional[StemMap] = None
    d_r2: Optional[StemMap] = None
    domain_hint: Optional[StemDomain] = None
    name: str = 'stem'

    @property
    def algebra(self) -> CliffordAlgebra:
        return CliffordAlgebra.for_signature(self.signature)

    @property
    def has_derivatives(self) -> bool:
        return None not in (self.d_xp1, self.d_xp2, self.d_r1, self.d_r2)

    def values(self, x_p, r) -> Tuple[np.ndarray, np.ndarray]:
        x_p, r = _as_batch(x_p, r)
        shape = (x_p.shape[0], self.signature.dim)
        first = np.broadcast_to(np.asarray(self.f1(x_p, r), dtype=float), shape)
        second = np.broadcast_to(np.asarray(self.f2(x_p, r), dtype=float), shape)
        return first, second

    def partials(self, x_p, r, h: float = DEFAULT_FD_STEP):
        """
        Partial derivatives (dxp1, dr1, dxp2, dr2) at a batch of stem points.

        Analytic derivatives are used when all four are supplied, otherwise
        second-order central differences of step h.
        """
        x_p, r = _as_batch(x_p, r)
        count, p1 = x_p.shape
        dim = self.signature.dim
        if self.has_derivatives:
            return (
                np.broadcast_to(self.d_xp1(x_p, r), (count, p1, dim)),
                np.broadcast_to(self.d_r1(x_p, r), (count, dim)),
                np.broadcast_to(self.d_xp2(x_p, r), (count, p1, dim)),
                np.broadcast_to(self.d_r2(x_p, r), (count, dim)),
            )
        offsets = np.concatenate([np.eye(p1 + 1), -np.eye(p1 + 1)]) * h
        shifted = np.append(x_p, r[:, None], axis=1)[:, None, :] + offsets[None, :, :]
        flat = shifted.reshape(-1, p1 + 1)
        first, second = self.values(flat[:, :p1], flat[:, p1])
        first = first.reshape(count, 2 * (p1 + 1), dim)
        second = second.reshape(count, 2 * (p1 + 1), dim)
        d_first = (first[:, :p1 + 1] - first[:, p1 + 1:]) / (2 * h)
        d_second = (second[:, :p1 + 1] - second[:, p1 + 1:]) / (2 * h)
        return d_first[:, :p1], d_first[:, p1], d_second[:, :p1], d_second[:, p1]

    def even_odd_violation(self, x_p, r) -> float:
        """Largest deviation from F1(x_p,-r) = F1(x_p,r), F2(x_p,-r) = -F2(x_p,r)."""
        x_p, r = _as_batch(x_p, r)
        first, second = self.values(x_p, r)
        first_m, second_m = self.values(x_p, -r)
        return float(max(np.max(np.abs(first - first_m)), np.max(np.abs(second + second_m))))


@dataclass(frozen=True, eq=False)
class SliceFunction:
    """
    Function on R^{p+q+1}: either induced from a stem or a raw evaluable map.

    Raw maps take points of shape (N, p+q+1) and only serve as boundary data
    or as non-slice controls.
    """

    signature: AlgebraSignature
    stem: Optional[StemFunction] = None
    raw: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = 'f'

    def __post_init__(self):
        if (self.stem is None) == (self.raw is None):
            raise ServiceException(
                message="A SliceFunction needs exactly one of stem or raw",
                code='invalid_stem',
            )
        if self.stem is not None and self.stem.signature != self.signature:
            raise ServiceException(message="Stem signature differs from function signature", code='signature_mismatch')

    @property
    def kind(self) -> str:
        return 'stem' if self.stem is not None else 'raw'

    @property
    def algebra(self) -> CliffordAlgebra:
        return CliffordAlgebra.for_signature(self.signature)

    def evaluate(self, points) -> np.ndarray:
        """Values at points of shape (N, p+q+1)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[-1] != self.signature.point_dim:
            raise ServiceException(
                message=f"Expected points with {self.signature.point_dim} coordinates",
                code='invalid_point',
            )
        if self.raw is not None:
            return np.asarray(self.raw(points), dtype=float).reshape(points.shape[0], self.signature.dim)
        p = self.signature.p
        x_p = points[:, :p + 1]
        x_q = points[:, p + 1:]
        r = np.linalg.norm(x_q, axis=1)
        first, second = self.stem.values(x_p, r)
        axis = r == 0.0
        if np.any(axis):
            if np.max(np.abs(second[axis])) > 1e-12:
                raise ServiceException(
                    message=f"{self.name}: F2(x_p, 0) != 0, induction is ill-defined on R^(p+1)",
                    code='ill_defined_induction',
                )
        omega = np.divide(x_q, r[:, None], out=np.zeros_like(x_q), where=~axis[:, None])
        return first + self.algebra.product(self.algebra.embed_sphere(omega), second)

    def evaluate_on_slice(self, x_p, t, direction) -> np.ndarray:
        """
        Values at x_p + t*direction for a fixed unit direction; t may be negative.
        """
        x_p, t = _as_batch(x_p, t)
        direction = np.asarray(direction, dtype=float)
        if self.stem is not None:
            first, second = self.stem.values(x_p, t)
            return first + self.algebra.product(self.algebra.embed_sphere(direction), second)
        points = np.concatenate([x_p, t[:, None] * direction[None, :]], axis=1)
        return self.evaluate(points)

    def __call__(self, x: SplitPoint) -> Multivector:
        return Multivector(self.signature, self.evaluate(x.coordinates[None, :])[0])


def zero_function(signature: AlgebraSignature) -> SliceFunction:
    dim = signature.dim
    zero = lambda x_p, r: np.zeros((len(r), dim))
    zero_p = lambda x_p, r: np.zeros((len(r), signature.p + 1, dim))
    return SliceFunction(signature, StemFunction(signature, zero, zero, zero_p, zero_p, zero, zero, name='zero'), name='zero')


def combine(terms: List[Tuple[float, SliceFunction]], name: Optional[str] = None) -> SliceFunction:
    """Real linear combination sum c_k f_k; stays stem-induced when every term is."""
    if not terms:
        raise ServiceException(message="combine needs at least one term", code='invalid_stem')
    signature = terms[0][1].signature
    label = name or ' + '.join(f"{c:g}*{f.name}" for c, f in terms)
    if any(f.signature != signature for _, f in terms):
        raise ServiceException(message="combine over mixed signatures", code='signature_mismatch')
    if all(f.kind == 'stem' for _, f in terms):
        stems = [(float(c), f.stem) for c, f in terms]

        def mix(attr):
            if any(getattr(s, attr) is None for _, s in stems):
                return None
            return lambda x_p, r: sum(c * np.asarray(getattr(s, attr)(x_p, r), dtype=float) for c, s in stems)

        stem = StemFunction(
            signature,
            mix('f1'), mix('f2'),
            mix('d_xp1'), mix('d_xp2'), mix('d_r1'), mix('d_r2'),
            domain_hint=stems[0][1].domain_hint,
            name=label,
        )
        return SliceFunction(signature, stem=stem, name=label)
    return SliceFunction(
        signature,
        raw=lambda pts: sum(float(c) * f.evaluate(pts) for c, f in terms),
        name=label,
    )


def induce(F: StemFunction, x: SplitPoint) -> Multivector:
    """
    F1(x_p, r) + omega F2(x_p, r) at one point.

    Raises:
        ServiceException: If r = 0 while F2(x_p, 0) != 0
    """
    if F.domain_hint is not None and not bool(F.domain_hint.slice_contains(x.x_p[None, :], np.array([x.r]))[0]):
        logger.warning(f"{F.name}: inducing outside the stem's domain hint at {x.stem}")
    return SliceFunction(F.signature, stem=F, name=F.name)(x)


def representation_eval(f: SliceFunction, x: SplitPoint, omega1, omega2) -> Multivector:
    """
    Right-hand side of the representation formula through two slices.

    (w - w2)(w1 - w2)^{-1} f(x_p + r w1) - (w - w1)(w1 - w2)^{-1} f(x_p + r w2)

    Raises:
        ServiceException: If omega1 == omega2
    """
    algebra = f.algebra
    omega1 = np.asarray(omega1, dtype=float)
    omega2 = np.asarray(omega2, dtype=float)
    difference = omega1 - omega2
    size = np.linalg.norm(difference)
    if size < 1e-14:
        raise ServiceException(message="representation_eval needs omega1 != omega2", code='singular_coefficients')
    own = x.omega if x.omega is not None else np.zeros(f.signature.q)
    w = algebra.embed_sphere(own)
    w1 = algebra.embed_sphere(omega1)
    w2 = algebra.embed_sphere(omega2)
    inverse = algebra.conjugate(algebra.embed_sphere(difference)) / size ** 2
    at_first = f.evaluate_on_slice(x.x_p[None, :], np.array([x.r]), omega1)[0]
    at_second = f.evaluate_on_slice(x.x_p[None, :], np.array([x.r]), omega2)[0]
    first = algebra.product(algebra.product(w - w2, inverse), at_first)
    second = algebra.product(algebra.product(w - w1, inverse), at_second)
    return Multivector(f.signature, first - second)


def representation_residual(f: SliceFunction, x: SplitPoint, eta) -> float:
    """|f(x) - (1 - w eta)/2 f(x_p + r eta) - (1 + w eta)/2 f(x_p - r eta)|."""
    algebra = f.algebra
    eta = np.asarray(eta, dtype=float)
    own = x.omega if x.omega is not None else np.zeros(f.signature.q)
    w_eta = algebra.product(algebra.embed_sphere(own), algebra.embed_sphere(eta))
    one = algebra.scalar(1.0)
    plus = f.evaluate_on_slice(x.x_p[None, :], np.array([x.r]), eta)[0]
    minus = f.evaluate_on_slice(x.x_p[None, :], np.array([-x.r]), eta)[0]
    value = f.evaluate(x.coordinates[None, :])[0]
    rebuilt = 0.5 * algebra.product(one - w_eta, plus) + 0.5 * algebra.product(one + w_eta, minus)
    return float(algebra.norm(value - rebuilt))


def _stem_vartheta(F: StemFunction, x_p, r, h: float) -> Tuple[np.ndarray, np.ndarray]:
    algebra = F.algebra
    dxp1, dr1, dxp2, dr2 = F.partials(x_p, r, h)
    first = dirac_p(algebra, dxp1) - dr2
    second = dirac_p(algebra, dxp2, conjugate=True) + dr1
    return first, second


def cr_residual(F: StemFunction, x_p, r, h: float = DEFAULT_FD_STEP) -> Tuple[Multivector, Multivector]:
    """
    Cauchy-Riemann residual pair of a stem at (x_p, r).

    Returns (D_{x_p}F1 - dF2/dr, conj(D_{x_p})F2 + dF1/dr); both vanish iff
    the induced function is in the kernel of vartheta-bar there, and
    vartheta-bar f = first + omega*second.
    """
    first, second = _stem_vartheta(F, np.asarray(x_p, dtype=float)[None, :], np.array([float(r)]), h)
    return Multivector(F.signature, first[0]), Multivector(F.signature, second[0])


def vartheta_stem(F: StemFunction, h: float = DEFAULT_FD_STEP) -> StemFunction:
    """Stem of vartheta-bar applied to the function induced by F."""
    return StemFunction(
        F.signature,
        f1=lambda x_p, r: _stem_vartheta(F, x_p, r, h)[0],
        f2=lambda x_p, r: _stem_vartheta(F, x_p, r, h)[1],
        domain_hint=F.domain_hint,
        name=f"vartheta({F.name})",
    )


def _coordinate_partials(f: SliceFunction, x: SplitPoint, h: float) -> np.ndarray:
    """Central differences d f / d x_i for all coordinates, shape (n+1, dim)."""
    size = f.signature.point_dim
    steps = np.eye(size) * h
    points = np.concatenate([x.coordinates + steps, x.coordinates - steps])
    values = f.evaluate(points)
    return (values[:size] - values[size:]) / (2 * h)


def _check_off_axis(x: SplitPoint, h: float):
    if x.r <= 2 * h:
        raise ServiceException(
            message=f"|x_q| = {x.r:g} <= 2h = {2 * h:g}: vartheta-bar is singular near R^(p+1)",
            code='singular_region',
        )


def apply_vartheta(f: SliceFunction, x: SplitPoint, h: float = DEFAULT_FD_STEP) -> Multivector:
    """
    vartheta-bar f = D_{x_p} f + (x_q / |x_q|^2) sum_{i>p} x_i d_i f at x.

    Stems with analytic partials are differentiated exactly; everything
    else by central differences of step h.
    """
    _check_off_axis(x, h)
    algebra = f.algebra
    if f.kind == 'stem' and f.stem.has_derivatives:
        first, second = _stem_vartheta(f.stem, x.x_p[None, :], np.array([x.r]), h)
        value = first[0] + algebra.product(algebra.embed_sphere(x.omega), second[0])
        return Multivector(f.signature, value)
    p = f.signature.p
    partials = _coordinate_partials(f, x, h)
    d_p = dirac_p(algebra, partials[None, :p + 1])[0]
    euler = np.tensordot(x.x_q, partials[p + 1:], axes=1)
    radial = algebra.embed_sphere(x.x_q / x.r ** 2)
    return Multivector(f.signature, d_p + algebra.product(radial, euler))


def apply_slice_dirac(f: SliceFunction, x: SplitPoint, h: float = DEFAULT_FD_STEP) -> Multivector:
    """D_omega f = (D_{x_p} + omega d/dr) f along the slice through x."""
    _check_off_axis(x, h)
    algebra = f.algebra
    p = f.signature.p
    partials = _coordinate_partials(f, x, h)
    d_p = dirac_p(algebra, partials[None, :p + 1])[0]
    along = f.evaluate_on_slice(np.stack([x.x_p, x.x_p]), np.array([x.r + h, x.r - h]), x.omega)
    d_r = (along[0] - along[1]) / (2 * h)
    return Multivector(f.signature, d_p + algebra.product(algebra.embed_sphere(x.omega), d_r))


def radial_weight(f: SliceFunction, s: float) -> SliceFunction:
    """
    Slice function with stem (|r|^s F1, |r|^s F2).

    Raises:
        ServiceException: If f is raw, or s < 0 while the stem's region
            reaches r = 0
    """
    if f.kind != 'stem':
        raise ServiceException(message="radial_weight needs a stem-induced function", code='invalid_stem')
    F = f.stem
    s = float(s)
    if s < 0 and (F.domain_hint is None or F.domain_hint.radial_gap <= 0):
        raise ServiceException(
            message=f"Exponent s={s:g} < 0 on a region touching r = 0",
            code='invalid_exponent',
        )
    if s == 0.0:
        return f

    def weight(r):
        return np.abs(r) ** s

    def d_weight(r):
        return s * np.abs(r) ** (s - 1.0) * np.sign(r)

    def weighted(base):
        return lambda x_p, r: weight(r)[:, None] * np.asarray(base(x_p, r), dtype=float)

    d_xp1 = d_xp2 = d_r1 = d_r2 = None
    if F.has_derivatives:
        d_xp1 = lambda x_p, r: weight(r)[:, None, None] * np.asarray(F.d_xp1(x_p, r), dtype=float)
        d_xp2 = lambda x_p, r: weight(r)[:, None, None] * np.asarray(F.d_xp2(x_p, r), dtype=float)
        d_r1 = lambda x_p, r: d_weight(r)[:, None] * F.values(x_p, r)[0] + weight(r)[:, None] * np.asarray(F.d_r1(x_p, r), dtype=float)
        d_r2 = lambda x_p, r: d_weight(r)[:, None] * F.values(x_p, r)[1] + weight(r)[:, None] * np.asarray(F.d_r2(x_p, r), dtype=float)
    stem = StemFunction(
        F.signature, weighted(F.f1), weighted(F.f2),
        d_xp1, d_xp2, d_r1, d_r2,
        domain_hint=F.domain_hint,
        name=f"|r|^{s:g}*{F.name}",
    )
    return SliceFunction(f.signature, stem=stem, name=stem.name)
