"""
Verification Service

This module provides the verification suites and their runner:
- SuiteRun: configuration, catalogue, operator contexts and sample points
  shared by the cells of one run
- One registered suite per property family: algebra, representation,
  kernel, cif, pompeiu, teodorescu, derivatives, plemelj, hodge, norms
- VerificationService.run_suite(name): cells executed on a thread pool,
  rows assembled in submission order
"""

import logging
import math
import threading
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..decorators.suites import get_suite, register_suite, registered_suites, timed
from ..serializers import ExperimentConfig, ResultRow
from .base_service import BaseService, ServiceException, service_setting
from .catalogue import CatalogueEntry, build_catalogue, bump_weighted, constant, section_pole
from .clifford_core import CliffordAlgebra, Multivector, SplitPoint, paravector_inverse
from .domains_quadrature import build_sphere_rule, mesh_spacing
from .integral_ops import IntegralOperatorService, OperatorContext
from .kernels import SurfaceConstants, embed_stem_vectors, gps_cauchy_kernel, kernel_coefficients
from .stem_slice import (
    SliceFunction,
    apply_vartheta,
    combine,
    cr_residual,
    representation_eval,
    representation_residual,
    zero_function,
)

logger = logging.getLogger(__name__)

ERROR_FLOOR = 1e-10
ALGEBRA_SAMPLES = 1000
REPRESENTATION_SAMPLES = 200
KERNEL_SAMPLES = 50
KERNEL_FD_STEP = 1e-4
CIF_SAMPLES = 20
POMPEIU_SAMPLES = 20
TEODORESCU_SAMPLES = 10
DERIVATIVE_SAMPLES = 20
DERIVATIVE_MAX_LEVEL = 4
JUMP_SAMPLES = 6
COMPOSITION_SAMPLES = 4
NORM_MAX_LEVEL = 3
HEMISPHERE_ROTATION = 0.37

# Stem offsets, in units of rho from the ball centre, of the Hodge kernel functionals
HODGE_EXTERIOR_OFFSETS = [
    (0.0, 0.0, 1.6),
    (1.6, 0.0, 0.0),
    (0.0, -1.6, 0.0),
    (1.2, 1.2, 0.5),
    (-1.3, 0.4, -0.8),
]
HODGE_INTERIOR_OFFSET = (0.2, 0.1, 0.1)


@dataclass(frozen=True)
class Cell:
    """Independent unit of work: rows of one suite case."""

    suite: str
    case: str
    level: int
    compute: Callable[[], List[ResultRow]]


def _unit(rng: np.random.Generator, size: int) -> np.ndarray:
    vector = rng.standard_normal(size)
    return vector / np.linalg.norm(vector)


def _stem_offset(m: int, offset: Sequence[float]) -> np.ndarray:
    """Place (x_0, x_1, r) offsets into R^m: first two and last stem coordinates."""
    out = np.zeros(m)
    out[0], out[1], out[-1] = offset
    return out


def _shifted(x: SplitPoint, index: int, step: float) -> SplitPoint:
    coordinates = np.array(x.coordinates)
    coordinates[index] += step
    return SplitPoint.from_coordinates(x.signature, coordinates)


class SuiteRun:
    """Shared state of one verification run."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.signature = config.signature()
        self.domain = config.build_domain()
        self.algebra = CliffordAlgebra.for_signature(self.signature)
        self.catalogue = build_catalogue(self.signature, self.domain)
        self.levels = list(config.levels)
        self.finest = config.finest_level
        self.operator_fd_step = float(service_setting('GPS_OPERATOR_FD_STEP', 1e-3))
        self.sphere_level = int(service_setting('GPS_SPHERE_LEVEL', 2))
        self.plemelj_max_level = int(service_setting('GPS_PLEMELJ_MAX_LEVEL', 4))
        self._contexts: Dict[tuple, OperatorContext] = {}
        self._lock = threading.Lock()

    def rng(self, suite: str) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, zlib.crc32(suite.encode())])

    def context(self, level: int, pv_mode: str = 'polar') -> OperatorContext:
        key = (level, pv_mode)
        with self._lock:
            if key not in self._contexts:
                self._contexts[key] = OperatorContext.build(
                    self.signature,
                    self.domain,
                    level,
                    sphere_level=self.sphere_level,
                    pv_factor=self.config.pv_factor,
                    fd_step=self.operator_fd_step,
                    pv_mode=pv_mode,
                )
            return self._contexts[key]

    def service(self, level: int, pv_mode: str = 'polar') -> IntegralOperatorService:
        return IntegralOperatorService(self.context(level, pv_mode))

    def entry(self, name: str) -> CatalogueEntry:
        return self.catalogue[name]

    def _point(self, stem: np.ndarray, eta: np.ndarray) -> SplitPoint:
        return SplitPoint.from_slice(self.signature, stem[:-1], stem[-1], eta)

    def interior_points(self, rng: np.random.Generator, count: int, depth: float = 0.3) -> List[SplitPoint]:
        """Random points at least depth*rho inside the domain."""
        m = self.signature.stem_dim
        points = []
        for _ in range(count):
            radius = (1.0 - depth) * self.domain.rho * rng.uniform() ** (1.0 / m)
            stem = self.domain.stem_center + radius * _unit(rng, m)
            points.append(self._point(stem, _unit(rng, self.signature.q)))
        return points

    def boundary_points(self, rng: np.random.Generator, count: int) -> List[SplitPoint]:
        m = self.signature.stem_dim
        return [
            self._point(self.domain.stem_center + self.domain.rho * _unit(rng, m), _unit(rng, self.signature.q))
            for _ in range(count)
        ]

    def exterior_points(self, rng: np.random.Generator, count: int, low: float = 0.1, high: float = 0.5) -> List[SplitPoint]:
        """Random points between (1+low)*rho and (1+high)*rho from the ball centre, with r > 0."""
        m = self.signature.stem_dim
        points = []
        for _ in range(count):
            direction = _unit(rng, m)
            direction[-1] = abs(direction[-1])
            stem = self.domain.stem_center + self.domain.rho * (1.0 + rng.uniform(low, high)) * direction
            points.append(self._point(stem, _unit(rng, self.signature.q)))
        return points

    def offset_point(self, offset: Sequence[float], eta: np.ndarray) -> SplitPoint:
        stem = self.domain.stem_center + self.domain.rho * _stem_offset(self.signature.stem_dim, offset)
        return self._point(stem, eta)

    def scale(self, f: SliceFunction, points: Sequence[SplitPoint]) -> float:
        return max(1.0, max(f(x).norm() for x in points))

    def excision_level(self) -> int:
        """Coarsest configured level whose excision radius pv_factor*mesh stays below rho, else the next finer one."""
        def fits(level):
            return self.config.pv_factor * mesh_spacing(self.domain, level) < self.domain.rho

        level = next((level for level in self.levels if fits(level)), None)
        if level is None:
            level = self.finest + 1
            while not fits(level):
                level += 1
        return level


def convergence_rows(
    suite: str,
    case: str,
    metric: str,
    errors: Dict[int, float],
    tolerance: float,
    min_order: Optional[float] = None,
    monotone_from: Optional[int] = None,
    floor: float = ERROR_FLOOR,
) -> List[ResultRow]:
    """
    Rows of an error study over levels.

    The tolerance binds at the finest level only.  An order row compares the
    last two levels unless the error already sits at the floor; the increase
    row records the largest growth between consecutive levels above the floor.
    """
    levels = sorted(errors)
    finest = levels[-1]
    rows = [
        ResultRow.residual(suite, case, level, metric, errors[level], tolerance if level == finest else math.inf)
        for level in levels
    ]
    if min_order is not None and len(levels) >= 2:
        previous = levels[-2]
        if errors[previous] > 10 * floor:
            order = math.log2(errors[previous] / max(errors[finest], floor)) / (finest - previous)
            rows.append(ResultRow.at_least(suite, case, finest, f'{metric}_order', order, min_order))
        else:
            rows.append(ResultRow.residual(suite, case, finest, f'{metric}_floor', errors[finest], 10 * floor))
    if monotone_from is not None:
        tracked = [level for level in levels if level >= monotone_from]
        increase = 0.0
        for a, b in zip(tracked, tracked[1:]):
            if errors[a] > 10 * floor:
                increase = max(increase, errors[b] - errors[a])
        rows.append(ResultRow.residual(suite, case, finest, f'{metric}_increase', increase, 0.0))
    return rows


# ----------------------------------------------------------------------
# algebra

@register_suite('algebra')
def algebra_suite(run: SuiteRun) -> List[Cell]:
    rng = run.rng('algebra')
    dim = run.algebra.dim
    a, b, c = (rng.standard_normal((ALGEBRA_SAMPLES, dim)) for _ in range(3))
    paravectors = rng.standard_normal((50, run.signature.n + 1))
    return [Cell('algebra', 'laws', 0, partial(_algebra_laws, run, a, b, c, paravectors))]


def _algebra_laws(run: SuiteRun, a, b, c, paravectors) -> List[ResultRow]:
    algebra = run.algebra
    signature = run.signature
    n = signature.n
    worst = 0.0
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            e_i = Multivector.basis(signature, i)
            e_j = Multivector.basis(signature, j)
            expected = -2.0 if i == j else 0.0
            worst = max(worst, (e_i * e_j + e_j * e_i - expected).norm())
    rows = [ResultRow.residual('algebra', 'generators', 0, 'anticommutation', worst, 0.0)]

    norm_a, norm_b, norm_c = algebra.norm(a), algebra.norm(b), algebra.norm(c)
    ab = algebra.product(a, b)
    associativity = algebra.product(ab, c) - algebra.product(a, algebra.product(b, c))
    conjugation = algebra.conjugate(ab) - algebra.product(algebra.conjugate(b), algebra.conjugate(a))
    reversal = algebra.reverse(ab) - algebra.product(algebra.reverse(b), algebra.reverse(a))
    involution = algebra.involute(ab) - algebra.product(algebra.involute(a), algebra.involute(b))
    squared = np.sum(a ** 2, axis=-1)
    norm_identity = np.abs(algebra.product(a, algebra.conjugate(a))[:, 0] - squared) / squared
    checks = [
        ('associativity', algebra.norm(associativity) / (norm_a * norm_b * norm_c)),
        ('conjugation_antiautomorphism', algebra.norm(conjugation) / (norm_a * norm_b)),
        ('reversion_antiautomorphism', algebra.norm(reversal) / (norm_a * norm_b)),
        ('involution_automorphism', algebra.norm(involution) / (norm_a * norm_b)),
        ('norm_identity', norm_identity),
    ]
    for metric, values in checks:
        rows.append(ResultRow.residual('algebra', 'random', 0, metric, float(np.max(values)), 1e-12))

    inverse_error = 0.0
    for coords in paravectors:
        x = Multivector.from_paravector(signature, coords)
        inverse_error = max(inverse_error, (x * paravector_inverse(x) - 1.0).norm())
    rows.append(ResultRow.residual('algebra', 'paravectors', 0, 'paravector_inverse', inverse_error, 1e-12))
    return rows


# ----------------------------------------------------------------------
# representation formula and stem structure

@register_suite('representation')
def representation_suite(run: SuiteRun) -> List[Cell]:
    rng = run.rng('representation')
    q = run.signature.q
    points = run.interior_points(rng, REPRESENTATION_SAMPLES)
    directions = [(_unit(rng, q), _unit(rng, q), _unit(rng, q)) for _ in points]
    return [
        Cell('representation', entry.name, 0, partial(_representation_case, run, entry, points, directions))
        for entry in run.catalogue.values()
    ]


def _representation_case(run: SuiteRun, entry: CatalogueEntry, points, directions) -> List[ResultRow]:
    f = entry.function
    worst = 0.0
    for x, (first, second, eta) in zip(points, directions):
        value = f(x)
        scale = max(1.0, value.norm())
        through_pair = (representation_eval(f, x, first, second) - value).norm()
        through_eta = representation_residual(f, x, eta)
        worst = max(worst, through_pair / scale, through_eta / scale)
    if f.kind == 'raw':
        return [ResultRow.at_least('representation', entry.name, 0, 'non_slice_residual', worst, 1e-3)]

    rows = [ResultRow.residual('representation', entry.name, 0, 'representation_residual', worst, 1e-12)]
    F = f.stem
    x_p = np.stack([x.x_p for x in points])
    r = np.array([x.r for x in points])
    rows.append(ResultRow.residual('representation', entry.name, 0, 'even_odd', F.even_odd_violation(x_p, r), 1e-12))
    if entry.monogenic:
        h = run.config.fd_step
        worst_cr = 0.0
        for x in points:
            first, second = cr_residual(F, x.x_p, x.r, h)
            scale = max(1.0, f(x).norm())
            worst_cr = max(worst_cr, first.norm() / scale, second.norm() / scale)
        tolerance = 1e-12 if F.has_derivatives else 1e-6
        rows.append(ResultRow.residual('representation', entry.name, 0, 'cr_residual', worst_cr, tolerance))
    return rows


# ----------------------------------------------------------------------
# kernels

@register_suite('kernel')
def kernel_suite(run: SuiteRun) -> List[Cell]:
    rng = run.rng('kernel')
    q = run.signature.q
    points = run.interior_points(rng, KERNEL_SAMPLES)
    pole = section_pole(run.domain)
    y = SplitPoint.from_slice(run.signature, pole[:-1], pole[-1], _unit(rng, q))
    pairs = [(_unit(rng, q), _unit(rng, q)) for _ in range(KERNEL_SAMPLES)]
    return [
        Cell('kernel', 'cauchy_kernel', 0, partial(_kernel_monogenicity, run, y, points)),
        Cell('kernel', 'coefficients', 0, partial(_kernel_coefficients, run, pairs)),
    ]


def _kernel_monogenicity(run: SuiteRun, y: SplitPoint, points) -> List[ResultRow]:
    signature = run.signature

    def kernel_values(rows):
        return np.stack([gps_cauchy_kernel(y, SplitPoint.from_coordinates(signature, row)).coeffs for row in rows])

    kernel = SliceFunction(signature, raw=kernel_values, name='E_y')
    worst = 0.0
    for x in points:
        residual = apply_vartheta(kernel, x, KERNEL_FD_STEP).norm()
        worst = max(worst, residual / gps_cauchy_kernel(y, x).norm())
    return [ResultRow.residual('kernel', 'cauchy_kernel', 0, 'vartheta_relative', worst, 1e-6)]


def _kernel_coefficients(run: SuiteRun, pairs) -> List[ResultRow]:
    signature = run.signature
    sums = grades = same = opposite = 0.0
    for eta, omega in pairs:
        coefficients = kernel_coefficients(signature, eta, omega)
        alpha = coefficients.alpha
        sums = max(sums, (alpha + coefficients.beta - 1.0).norm())
        grades = max(grades, (alpha - alpha.grade(0) - alpha.grade(2)).norm())
        same = max(same, (kernel_coefficients(signature, eta, eta).alpha - 1.0).norm())
        opposite = max(opposite, kernel_coefficients(signature, eta, -eta).alpha.norm())
    return [
        ResultRow.residual('kernel', 'coefficients', 0, 'alpha_plus_beta', sums, 1e-14),
        ResultRow.residual('kernel', 'coefficients', 0, 'alpha_grades', grades, 1e-14),
        ResultRow.residual('kernel', 'coefficients', 0, 'alpha_same_direction', same, 1e-14),
        ResultRow.residual('kernel', 'coefficients', 0, 'alpha_opposite_direction', opposite, 1e-14),
    ]


# ----------------------------------------------------------------------
# Cauchy integral formula

@register_suite('cif')
def cif_suite(run: SuiteRun) -> List[Cell]:
    rng = run.rng('cif')
    interior = run.interior_points(rng, CIF_SAMPLES)
    exterior = run.exterior_points(rng, JUMP_SAMPLES)
    return [
        Cell('cif', name, run.finest, partial(_cif_case, run, run.entry(name), interior, exterior))
        for name in ('constant', 'linear', 'square', 'kernel_section')
    ]


def _cif_case(run: SuiteRun, entry: CatalogueEntry, interior, exterior) -> List[ResultRow]:
    f = entry.function
    scale = run.scale(f, interior)
    errors = {}
    outside = 0.0
    for level in run.levels:
        service = run.service(level)
        errors[level] = max((service.cauchy_boundary_F(f, x) - f(x)).norm() for x in interior) / scale
        if level == run.finest:
            outside = max(service.cauchy_boundary_F(f, x).norm() for x in exterior) / scale
    rows = convergence_rows('cif', entry.name, 'relative_error', errors, 1e-3, min_order=2.0,
                            monotone_from=run.levels[0])
    rows.append(ResultRow.residual('cif', entry.name, run.finest, 'exterior_relative', outside, 1e-3))
    return rows


# ----------------------------------------------------------------------
# Cauchy-Pompeiu

@register_suite('pompeiu')
def pompeiu_suite(run: SuiteRun) -> List[Cell]:
    rng = run.rng('pompeiu')
    points = run.interior_points(rng, POMPEIU_SAMPLES)
    return [
        Cell('pompeiu', 'x0_squared', run.finest, partial(_pompeiu_case, run, run.entry('x0_squared'), points, 1e-2)),
        Cell('pompeiu', 'constant', run.finest, partial(_pompeiu_case, run, run.entry('constant'), points, 1e-3)),
    ]


def _pompeiu_case(run: SuiteRun, entry: CatalogueEntry, points, tolerance: float) -> List[ResultRow]:
    f = entry.function
    scale = run.scale(f, points)
    errors = {}
    for level in run.levels:
        service = run.service(level)
        errors[level] = max(service.cauchy_pompeiu_residual(f, x, run.config.fd_step) for x in points) / scale
    return convergence_rows('pompeiu', entry.name, 'relative_residual', errors, tolerance, monotone_from=3)


# ----------------------------------------------------------------------
# Teodorescu transform as left inverse of vartheta-bar

@register_suite('teodorescu')
def teodorescu_suite(run: SuiteRun) -> List[Cell]:
    rng = run.rng('teodorescu')
    points = run.interior_points(rng, TEODORESCU_SAMPLES)
    omega = _unit(rng, run.signature.q)
    cells = [
        Cell('teodorescu', name, run.finest, partial(_left_inverse_case, run, run.entry(name), points, omega))
        for name in ('constant', 'linear', 'x0_squared')
    ]
    # excise mode empties the ball when 2*mesh >= rho
    level = run.excision_level()
    cells.append(Cell('teodorescu', 'identities', level, partial(_teodorescu_identities, run, points[:3], omega, level)))
    return cells


def _left_inverse_case(run: SuiteRun, entry: CatalogueEntry, points, omega) -> List[ResultRow]:
    f = entry.function
    h = run.operator_fd_step
    scale = run.scale(f, points)
    sliced_errors = {}
    full_errors = {}
    for level in run.levels:
        service = run.service(level)
        sliced = service.as_slice_function(lambda x: service.teodorescu_slice(f, omega, x), f"T_omega({f.name})")
        full = service.as_slice_function(lambda x: service.teodorescu_full(f, x), f"T({f.name})")
        sliced_errors[level] = max((apply_vartheta(sliced, x, h) - 2.0 * f(x)).norm() for x in points) / (2.0 * scale)
        full_errors[level] = max((apply_vartheta(full, x, h) - f(x)).norm() for x in points) / scale
    floor = max(ERROR_FLOOR, 100.0 * h ** 2)
    rows = convergence_rows('teodorescu', entry.name, 'slice_left_inverse', sliced_errors, 5e-2,
                            monotone_from=run.levels[0], floor=floor)
    rows += convergence_rows('teodorescu', entry.name, 'full_left_inverse', full_errors, 5e-2,
                             monotone_from=run.levels[0], floor=floor)
    return rows


def _teodorescu_identities(run: SuiteRun, points, omega, level: int) -> List[ResultRow]:
    signature = run.signature
    service = run.service(level)
    linear = run.entry('linear').function
    square = run.entry('x0_squared').function
    mixed = combine([(0.7, linear), (-1.3, square)])
    scale = run.scale(mixed, points)

    zero = max(service.teodorescu_slice(zero_function(signature), omega, x).norm() for x in points)
    linearity = max(
        (service.teodorescu_slice(mixed, omega, x)
         - 0.7 * service.teodorescu_slice(linear, omega, x)
         + 1.3 * service.teodorescu_slice(square, omega, x)).norm()
        for x in points
    ) / scale

    sphere = service.ctx.sphere_rule
    average = 0.0
    for x in points:
        total = Multivector.zero(signature)
        for direction, weight in zip(sphere.nodes, sphere.weights):
            total = total + weight * service.teodorescu_slice(linear, direction, x)
        total = total / SurfaceConstants.sigma(signature.q - 1)
        average = max(average, (service.teodorescu_full(linear, x) - total).norm())

    rotated = IntegralOperatorService(service.ctx.with_sphere_rule(
        build_sphere_rule(signature.q, run.sphere_level, rotation=HEMISPHERE_ROTATION, axis=0)
    ))
    hemisphere = max((rotated.teodorescu_full(linear, x) - service.teodorescu_full(linear, x)).norm() for x in points) / scale

    excised = run.service(level, pv_mode='excise')
    paths = max(
        (excised.teodorescu_full(linear, x, path='slices') - excised.teodorescu_full(linear, x, path='direct')).norm()
        for x in points
    ) / scale
    return [
        ResultRow.residual('teodorescu', 'identities', level, 'zero', zero, 0.0),
        ResultRow.residual('teodorescu', 'identities', level, 'linearity', linearity, 1e-12),
        ResultRow.residual('teodorescu', 'identities', level, 'sphere_average', average / scale, 1e-12),
        ResultRow.residual('teodorescu', 'identities', level, 'hemisphere_choice', hemisphere, 1e-9),
        ResultRow.residual('teodorescu', 'identities', level, 'paths_agree', paths, 1e-10),
    ]


# ----------------------------------------------------------------------
# closed-form derivatives of T

@register_suite('derivatives')
def derivatives_suite(run: SuiteRun) -> List[Cell]:
    rng = run.rng('derivatives')
    points = run.interior_points(rng, DERIVATIVE_SAMPLES)
    omega = _unit(rng, run.signature.q)
    level = min(run.finest, DERIVATIVE_MAX_LEVEL)
    centres = [point.stem for point in run.interior_points(rng, 5)]
    directions = [_unit(rng, run.signature.q) for _ in centres]
    cells = [
        Cell('derivatives', name, level, partial(_derivative_case, run, run.entry(name), points, omega, level))
        for name in ('linear', 'x0_squared')
    ]
    cells.append(Cell('derivatives', 'ball_constant', level, partial(_ball_constant, run, centres, directions, level)))
    return cells


def _derivative_case(run: SuiteRun, entry: CatalogueEntry, points, omega, level: int) -> List[ResultRow]:
    f = entry.function
    p, q = run.signature.p, run.signature.q
    h = run.operator_fd_step
    service = run.service(level)
    scale = run.scale(f, points)
    errors = {'slice_p': 0.0, 'slice_q': 0.0, 'full_p': 0.0, 'full_q': 0.0}
    euler = 0.0
    for x in points:
        for i in range(p + q + 1):
            ahead, behind = _shifted(x, i, h), _shifted(x, i, -h)
            sliced_fd = (service.teodorescu_slice(f, omega, ahead) - service.teodorescu_slice(f, omega, behind)) / (2 * h)
            full_fd = (service.teodorescu_full(f, ahead) - service.teodorescu_full(f, behind)) / (2 * h)
            if i <= p:
                sliced = service.teodorescu_derivative_p(f, omega, x, i)
                key = 'p'
            else:
                sliced = service.teodorescu_derivative_q(f, omega, x, i)
                key = 'q'
            full = service.teodorescu_full_derivative(f, x, i)
            errors[f'slice_{key}'] = max(errors[f'slice_{key}'], (sliced - sliced_fd).norm())
            errors[f'full_{key}'] = max(errors[f'full_{key}'], (full - full_fd).norm())
        along = Multivector.zero(run.signature)
        for k in range(q):
            along = along + x.x_q[k] * service.teodorescu_derivative_q(f, omega, x, p + 1 + k)
        euler = max(euler, (along - x.r * service.teodorescu_radial(f, omega, x)).norm())
    tolerance = 1e-3
    rows = [
        ResultRow.residual('derivatives', entry.name, level, f'{key}_fd_relative', value / scale, tolerance)
        for key, value in errors.items()
    ]
    rows.append(ResultRow.residual('derivatives', entry.name, level, 'euler_identity', euler / scale, 1e-10))
    zero = service.teodorescu_derivative_p(zero_function(run.signature), omega, points[0], 0).norm()
    rows.append(ResultRow.residual('derivatives', entry.name, level, 'zero', zero, 0.0))
    return rows


def _ball_constant(run: SuiteRun, centres, directions, level: int) -> List[ResultRow]:
    """Single-ball transform of a constant: conj(z - c_B) c / m and its x_p-derivatives."""
    signature = run.signature
    algebra = run.algebra
    p, m = signature.p, signature.stem_dim
    service = run.service(level)
    c = run.entry('constant').function
    value = c(run.offset_point((0.0, 0.0, 0.0), directions[0])).coeffs
    scale = max(1.0, float(algebra.norm(value)))
    h = run.operator_fd_step
    exact_error = derivative_error = 0.0
    for z, d in zip(centres, directions):
        offset = embed_stem_vectors(algebra, z - run.domain.stem_center, d)
        exact = algebra.product(algebra.conjugate(offset), value) / m
        exact_error = max(exact_error, float(algebra.norm(service.ball_teodorescu(c, z, d).coeffs - exact)))
        for i in range(p + 1):
            step = np.zeros(m)
            step[i] = h
            slope = (service.ball_teodorescu(c, z + step, d) - service.ball_teodorescu(c, z - step, d)) / (2 * h)
            expected = algebra.product(algebra.conjugate(embed_stem_vectors(algebra, step / h, d)), value) / m
            derivative_error = max(derivative_error, float(algebra.norm(slope.coeffs - expected)))
    return [
        ResultRow.residual('derivatives', 'ball_constant', level, 'exact_relative', exact_error / scale, 1e-6),
        ResultRow.residual('derivatives', 'ball_constant', level, 'derivative_relative', derivative_error / scale, 1e-6),
    ]


# ----------------------------------------------------------------------
# Plemelj-Sokhotski relations

@register_suite('plemelj')
def plemelj_suite(run: SuiteRun) -> List[Cell]:
    rng = run.rng('plemelj')
    jump_points = run.boundary_points(rng, JUMP_SAMPLES)
    composition_points = run.boundary_points(rng, COMPOSITION_SAMPLES)
    composed_levels = [level for level in run.levels if level <= run.plemelj_max_level] or run.levels[:1]
    cells = [
        Cell('plemelj', f'jump_{name}', run.finest, partial(_jump_case, run, run.entry(name), jump_points))
        for name in ('linear', 'kernel_section')
    ]
    cells += [
        Cell('plemelj', f'compose_{name}', composed_levels[-1],
             partial(_composition_case, run, run.entry(name), composition_points, composed_levels))
        for name in ('linear', 'x0_squared')
    ]
    return cells


def _jump_case(run: SuiteRun, entry: CatalogueEntry, points) -> List[ResultRow]:
    f = entry.function
    case = f'jump_{entry.name}'
    scale = run.scale(f, points)
    rows = []
    for level in run.levels:
        service = run.service(level)
        tolerance = 5e-2 if level == run.finest else math.inf
        interior = exterior = fixed = 0.0
        for x in points:
            limit, target = service.plemelj_jump(f, x, side='interior')
            interior = max(interior, (limit - target).norm())
            limit, target = service.plemelj_jump(f, x, side='exterior')
            exterior = max(exterior, (limit - target).norm())
            fixed = max(fixed, (service.plemelj_S(f, x) - f(x)).norm())
        rows += [
            ResultRow.residual('plemelj', case, level, 'interior_jump', interior / scale, tolerance),
            ResultRow.residual('plemelj', case, level, 'exterior_jump', exterior / scale, tolerance),
            ResultRow.residual('plemelj', case, level, 'trace_fixed', fixed / scale, tolerance),
        ]
    return rows


def _composition_case(run: SuiteRun, entry: CatalogueEntry, points, levels) -> List[ResultRow]:
    """S^2, P^2, Q^2, PQ, QP and P + Q; Pu and Qu are built from u and the lazy image Su."""
    u = entry.function
    case = f'compose_{entry.name}'
    scale = run.scale(u, points)
    rows = []
    for level in levels:
        service = run.service(level)
        image = service.plemelj_image(u)
        projected_u = combine([(0.5, u), (0.5, image)], name=f"P({u.name})")
        complement_u = combine([(0.5, u), (-0.5, image)], name=f"Q({u.name})")
        tolerance = 5e-2 if level == levels[-1] else math.inf
        worst = dict.fromkeys(('s_squared', 'p_squared', 'q_squared', 'pq', 'qp', 'p_plus_q'), 0.0)
        for x in points:
            value = u(x)
            projected = service.plemelj_P(u, x)
            complement = service.plemelj_Q(u, x)
            measured = {
                's_squared': service.plemelj_S(image, x) - value,
                'p_squared': service.plemelj_P(projected_u, x) - projected,
                'q_squared': service.plemelj_Q(complement_u, x) - complement,
                'pq': service.plemelj_P(complement_u, x),
                'qp': service.plemelj_Q(projected_u, x),
                'p_plus_q': projected + complement - value,
            }
            for key, residual in measured.items():
                worst[key] = max(worst[key], residual.norm())
        for key, value in worst.items():
            bound = 1e-13 if key == 'p_plus_q' else tolerance
            rows.append(ResultRow.residual('plemelj', case, level, key, value / scale, bound))
    zero = service.plemelj_S(zero_function(run.signature), points[0]).norm()
    rows.append(ResultRow.residual('plemelj', case, levels[-1], 'zero', zero, 0.0))
    return rows


# ----------------------------------------------------------------------
# Hodge orthogonality

@register_suite('hodge')
def hodge_suite(run: SuiteRun) -> List[Cell]:
    eta = np.ones(run.signature.q) / math.sqrt(run.signature.q)
    exterior = [run.offset_point(offset, eta) for offset in HODGE_EXTERIOR_OFFSETS]
    interior = run.offset_point(HODGE_INTERIOR_OFFSET, eta)
    cells = [
        Cell('hodge', name, run.finest, partial(_hodge_case, run, run.entry(name), exterior, interior))
        for name in ('bump', 'bump_linear')
    ]
    cells.append(Cell('hodge', 'zero', run.levels[0], partial(_hodge_zero, run, exterior[0])))
    return cells


def _hodge_case(run: SuiteRun, entry: CatalogueEntry, exterior, interior) -> List[ResultRow]:
    g = entry.function
    errors = {}
    for level in run.levels:
        service = run.service(level)
        errors[level] = max(service.hodge_orthogonality_residual(x, g) for x in exterior)
    rows = convergence_rows('hodge', entry.name, 'orthogonality_residual', errors, 1e-3)
    control = run.service(run.finest).hodge_orthogonality_residual(interior, g, allow_interior=True)
    ratio = control / max(errors[run.finest], ERROR_FLOOR)
    rows.append(ResultRow.at_least('hodge', entry.name, run.finest, 'negative_control_ratio', ratio, 10.0))
    return rows


def _hodge_zero(run: SuiteRun, x: SplitPoint) -> List[ResultRow]:
    level = run.levels[0]
    vanishing = bump_weighted(zero_function(run.signature), run.domain)
    try:
        run.service(level).hodge_orthogonality_residual(x, vanishing)
        rejected = False
    except ServiceException as e:
        rejected = e.code == 'degenerate_function'
    return [ResultRow.residual('hodge', 'zero', level, 'zero_accepted', 0.0 if rejected else 1.0, 0.0)]


# ----------------------------------------------------------------------
# norms and inner products

@register_suite('norms')
def norms_suite(run: SuiteRun) -> List[Cell]:
    cells = [Cell('norms', 'identities', level, partial(_norm_identities, run, level)) for level in run.levels]
    level = min(run.finest, NORM_MAX_LEVEL)
    cells.append(Cell('norms', 'operator_norm', level, partial(_operator_norms, run, level)))
    return cells


def _norm_identities(run: SuiteRun, level: int) -> List[ResultRow]:
    signature = run.signature
    service = run.service(level)
    one = constant(signature, Multivector.scalar(signature, 1.0))
    f = run.entry('linear').function
    g = run.entry('x0_squared').function
    volume = run.domain.completion_volume(signature.q)
    rows = []
    for t in (2.0, 3.0):
        expected = volume ** (1.0 / t)
        rows.append(ResultRow.residual('norms', 'identities', level, f'volume_t{t:g}',
                                       abs(service.lt_norm(one, t) - expected) / expected, 1e-10))
    size = service.lt_norm(f, 2.0)
    squared = service.inner_product(f, f)
    rows.append(ResultRow.residual('norms', 'identities', level, 'inner_matches_norm',
                                   abs(math.sqrt(max(squared.scalar_part, 0.0)) - size) / size, 1e-10))
    rows.append(ResultRow.residual('norms', 'identities', level, 'inner_nonnegative', max(0.0, -squared.scalar_part), 0.0))
    pair = service.inner_product(f, g)
    swapped = service.inner_product(g, f)
    rows.append(ResultRow.residual('norms', 'identities', level, 'hermitian',
                                   (pair - swapped.conjugate()).norm() / (size * service.lt_norm(g, 2.0)), 1e-12))
    scaled = service.lt_norm(combine([(-2.5, f)]), 2.0)
    rows.append(ResultRow.residual('norms', 'identities', level, 'homogeneity', abs(scaled - 2.5 * size) / size, 1e-12))
    zero = zero_function(signature)
    rows.append(ResultRow.residual('norms', 'identities', level, 'zero', service.inner_product(zero, zero).norm(), 0.0))
    return rows


def _operator_norms(run: SuiteRun, level: int) -> List[ResultRow]:
    service = run.service(level)
    return [
        ResultRow.reported('norms', 'operator_norm', level, f'ratio_{name}', service.operator_norm_ratio(run.entry(name).function))
        for name in ('constant', 'linear', 'x0_squared')
    ]


# ----------------------------------------------------------------------
# runner

class VerificationService(BaseService):
    """
    Runs verification suites for one experiment configuration.

    Cells run on a thread pool of GPS_THREADS workers; rows come back in
    submission order, so output does not depend on the worker count.
    """

    def __init__(self, config: ExperimentConfig, threads: Optional[int] = None):
        super().__init__(label='verify')
        self.config = config
        threads = service_setting('GPS_THREADS', 1) if threads is None else threads
        self.threads = max(1, int(threads))
        self._run: Optional[SuiteRun] = None

    @property
    def run(self) -> SuiteRun:
        if self._run is None:
            self._run = SuiteRun(self.config)
        return self._run

    @staticmethod
    def suite_names(name: str) -> List[str]:
        if name == 'all':
            return registered_suites()
        get_suite(name)
        return [name]

    def cells(self, name: str) -> List[Cell]:
        return [cell for suite in self.suite_names(name) for cell in get_suite(suite)(self.run)]

    def _execute(self, cell: Cell) -> List[ResultRow]:
        rows = self.run_guarded(timed(f"{cell.suite}/{cell.case}/L{cell.level}")(cell.compute))
        for row in rows:
            if not row.passed:
                self.logger.warning(
                    f"FAILED {row.suite}/{row.case} level {row.level} {row.metric}: "
                    f"{row.value:.3e} vs {row.tolerance:.3e}"
                )
        return rows

    def run_suite(self, name: str) -> List[ResultRow]:
        names = self.suite_names(name)
        cells = [cell for suite in names for cell in get_suite(suite)(self.run)]
        self.log_action(f"Running suite '{name}'", {'cells': len(cells), 'threads': self.threads})
        if self.threads == 1:
            chunks = [self._execute(cell) for cell in cells]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                futures = [pool.submit(self._execute, cell) for cell in cells]
                chunks = [future.result() for future in futures]
        return [row for chunk in chunks for row in chunk]


def run_suite(name: str, config: ExperimentConfig) -> List[ResultRow]:
    """Rows of one suite, or of every registered suite for 'all'."""
    return VerificationService(config).run_suite(name)
