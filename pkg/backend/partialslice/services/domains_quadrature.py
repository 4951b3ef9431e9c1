"""
Domains and Quadrature

This module provides the p-symmetric domains used by the integral operators
and every quadrature rule they integrate with:
- MirroredBallDomain: D = B((c_p, r0), rho) U B((c_p, -r0), rho) in R^{p+2}
  and its completion Omega_D in R^{p+q+1}
- Slice rules on the r > 0 ball (boundary sphere and solid ball); the r < 0
  mirror is reached through the direction -omega, never enumerated twice
- Hemisphere rules on S^+ in R^q
- Principal-value excision and the singularity-centred rules used for
  weakly and strongly singular kernels

Level L uses 2^L nodes in each polar angle, 2^(L+1) in azimuth and 2^L in
the radius.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import gamma, roots_gegenbauer, roots_jacobi, roots_legendre

from .base_service import ServiceException
from .clifford_core import SplitPoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MirroredBallDomain:
    """Reflection-symmetric pair of balls in R^{p+2} centred at (c_p, +-r0)."""

    center_p: Tuple[float, ...]
    r0: float
    rho: float

    def __post_init__(self):
        object.__setattr__(self, 'center_p', tuple(float(c) for c in self.center_p))
        if not len(self.center_p) >= 2:
            raise ServiceException(message="center_p needs p+1 >= 2 coordinates", code='invalid_domain')
        if not self.rho > 0:
            raise ServiceException(message=f"rho must be positive (rho={self.rho})", code='invalid_domain')
        if not self.r0 > self.rho:
            raise ServiceException(
                message=f"r0 > rho violated (r0={self.r0}, rho={self.rho}): the completion would touch R^(p+1)",
                code='invalid_domain',
            )

    @property
    def p(self) -> int:
        return len(self.center_p) - 1

    @property
    def stem_dim(self) -> int:
        return self.p + 2

    @property
    def stem_center(self) -> np.ndarray:
        """Centre (c_p, r0) of the r > 0 ball."""
        return np.array(self.center_p + (self.r0,))

    @property
    def radial_gap(self) -> float:
        """Lower bound r0 - rho of |x_q| over Omega_D."""
        return self.r0 - self.rho

    def stem_offset(self, x_p, r) -> np.ndarray:
        """Distance from the r > 0 ball centre of (x_p, |r|)."""
        x_p = np.atleast_2d(np.asarray(x_p, dtype=float))
        r = np.abs(np.atleast_1d(np.asarray(r, dtype=float)))
        stem = np.append(x_p, r[:, None], axis=1)
        return np.linalg.norm(stem - self.stem_center, axis=1)

    def slice_contains(self, x_p, r) -> np.ndarray:
        return self.stem_offset(x_p, r) < self.rho

    def contains(self, x: SplitPoint) -> bool:
        """x in Omega_D, i.e. (x_p, |x_q|) in the r > 0 ball."""
        return bool(self.slice_contains(x.x_p[None, :], np.array([x.r]))[0])

    def boundary_gap(self, stem_point) -> float:
        """Signed distance rho - |z - c| of a stem point (positive inside)."""
        return float(self.rho - np.linalg.norm(np.asarray(stem_point, dtype=float) - self.stem_center))

    def project_to_boundary(self, stem_point) -> np.ndarray:
        offset = np.asarray(stem_point, dtype=float) - self.stem_center
        size = np.linalg.norm(offset)
        if size == 0.0:
            raise ServiceException(message="The ball centre has no unique boundary projection", code='invalid_point')
        return self.stem_center + self.rho * offset / size

    def ball_volume(self) -> float:
        m = self.stem_dim
        return math.pi ** (m / 2) / gamma(m / 2 + 1) * self.rho ** m

    def sphere_area(self) -> float:
        m = self.stem_dim
        return 2 * math.pi ** (m / 2) / gamma(m / 2) * self.rho ** (m - 1)

    def completion_volume(self, q: int) -> float:
        """
        Volume of Omega_D in R^{p+q+1}: sigma_{q-1} * int_B r^{q-1} dy.

        The moments of the last coordinate over the ball are exact, so for
        q = 2 this is Pappus' 2*pi*r0*|B|.
        """
        m = self.stem_dim
        degree = q - 1
        moment = 0.0
        for k in range(0, degree + 1, 2):
            j = k // 2
            ball_moment = (self.rho ** k) * gamma(j + 0.5) * gamma(m / 2 + 1) / (math.sqrt(math.pi) * gamma(m / 2 + j + 1))
            moment += math.comb(degree, k) * self.r0 ** (degree - k) * ball_moment
        sigma = 2 * math.pi ** (q / 2) / gamma(q / 2)
        return sigma * moment * self.ball_volume()


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes, weights and (boundary rules only) outward unit normals."""

    nodes: np.ndarray
    weights: np.ndarray
    normals: Optional[np.ndarray] = None
    mesh_spacing: float = 0.0

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Weighted sum over the first axis of values."""
        return np.tensordot(self.weights, values, axes=1)

    def subset(self, keep: np.ndarray) -> 'QuadratureRule':
        return QuadratureRule(
            self.nodes[keep],
            self.weights[keep],
            None if self.normals is None else self.normals[keep],
            self.mesh_spacing,
        )


@dataclass(frozen=True, eq=False)
class SliceQuadrature:
    """Boundary and/or volume rules on the r > 0 ball at one level."""

    level: int
    boundary: Optional[QuadratureRule] = None
    volume: Optional[QuadratureRule] = None

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.boundary.nodes

    @property
    def boundary_normals(self) -> np.ndarray:
        return self.boundary.normals

    @property
    def boundary_weights(self) -> np.ndarray:
        return self.boundary.weights

    @property
    def volume_nodes(self) -> np.ndarray:
        return self.volume.nodes

    @property
    def volume_weights(self) -> np.ndarray:
        return self.volume.weights

    @property
    def mesh_spacing(self) -> float:
        rule = self.volume if self.volume is not None else self.boundary
        return rule.mesh_spacing

    def merged(self, other: 'SliceQuadrature') -> 'SliceQuadrature':
        return SliceQuadrature(
            self.level,
            self.boundary if self.boundary is not None else other.boundary,
            self.volume if self.volume is not None else other.volume,
        )


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Nodes omega on the open hemisphere S^+ of R^q with weights dS_omega."""

    q: int
    level: int
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True, eq=False)
class CenteredRule:
    """
    Ray rule y = z + s*u over a ball, centred at an interior point z.

    int_B g(y) dy = sum_u w_u sum_s w_s s^(m-1) g(z + s u); the radial
    weights exclude the s^(m-1) Jacobian so kernels can cancel it exactly.
    """

    center: np.ndarray
    directions: np.ndarray
    direction_weights: np.ndarray
    radii: np.ndarray
    radial_weights: np.ndarray
    reach: np.ndarray

    def points(self) -> np.ndarray:
        return self.center + self.radii[:, :, None] * self.directions[:, None, :]

    def volume_weights(self) -> np.ndarray:
        m = self.center.shape[0]
        return self.direction_weights[:, None] * self.radial_weights * self.radii ** (m - 1)


def _check_level(level: int):
    if level < 0:
        raise ServiceException(message=f"Quadrature level must be >= 0 (got {level})", code='invalid_level')


def mesh_spacing(domain: MirroredBallDomain, level: int) -> float:
    """Characteristic node spacing rho*pi/2^level of the slice rules."""
    return domain.rho * math.pi / 2 ** level


def unit_sphere_rule(k: int, n_polar: int, n_azimuth: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product rule on the unit sphere S^k in R^{k+1}.

    Trapezoid in azimuth for S^1; for k >= 2 the last coordinate t carries a
    Gauss-Gegenbauer rule with weight (1-t^2)^((k-2)/2) (Gauss-Legendre on
    S^2) and the remaining coordinates a scaled S^{k-1} rule.
    """
    if k == 1:
        phi = 2 * np.pi * np.arange(n_azimuth) / n_azimuth
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(n_azimuth, 2 * np.pi / n_azimuth)
    if k == 2:
        t, w_t = roots_legendre(n_polar)
    else:
        t, w_t = roots_gegenbauer(n_polar, (k - 1) / 2)
    lower, w_lower = unit_sphere_rule(k - 1, n_polar, n_azimuth)
    scale = np.sqrt(1.0 - t ** 2)
    directions = np.concatenate(
        [
            scale[:, None, None] * lower[None, :, :],
            np.broadcast_to(t[:, None, None], (len(t), len(lower), 1)),
        ],
        axis=2,
    ).reshape(-1, k + 1)
    weights = (w_t[:, None] * w_lower[None, :]).reshape(-1)
    return directions, weights


def _rule_sizes(level: int) -> Tuple[int, int, int]:
    return 2 ** level, 2 ** (level + 1), 2 ** level


def build_boundary_rule(domain: MirroredBallDomain, level: int) -> SliceQuadrature:
    """Tensor-product rule on the sphere of the r > 0 ball."""
    _check_level(level)
    m = domain.stem_dim
    n_polar, n_azimuth, _ = _rule_sizes(level)
    directions, weights = unit_sphere_rule(m - 1, n_polar, n_azimuth)
    rule = QuadratureRule(
        nodes=domain.stem_center + domain.rho * directions,
        weights=weights * domain.rho ** (m - 1),
        normals=directions,
        mesh_spacing=mesh_spacing(domain, level),
    )
    logger.debug(f"Boundary rule level {level}: {len(rule)} nodes")
    return SliceQuadrature(level=level, boundary=rule)


def build_volume_rule(domain: MirroredBallDomain, level: int) -> SliceQuadrature:
    """Gauss-Jacobi radius (weight s^(m-1)) times the sphere rule inside the r > 0 ball."""
    _check_level(level)
    m = domain.stem_dim
    n_polar, n_azimuth, n_radial = _rule_sizes(level)
    directions, w_dir = unit_sphere_rule(m - 1, n_polar, n_azimuth)
    x, w_x = roots_jacobi(n_radial, 0.0, m - 1.0)
    radii = domain.rho * (x + 1.0) / 2.0
    w_radii = w_x * (domain.rho / 2.0) ** m
    nodes = domain.stem_center + (radii[:, None, None] * directions[None, :, :]).reshape(-1, m)
    weights = (w_radii[:, None] * w_dir[None, :]).reshape(-1)
    rule = QuadratureRule(nodes=nodes, weights=weights, mesh_spacing=mesh_spacing(domain, level))
    logger.debug(f"Volume rule level {level}: {len(rule)} nodes")
    return SliceQuadrature(level=level, volume=rule)


def build_slice_rules(domain: MirroredBallDomain, level: int) -> SliceQuadrature:
    return build_boundary_rule(domain, level).merged(build_volume_rule(domain, level))


def build_sphere_rule(q: int, level: int, rotation: float = 0.0, axis: Optional[int] = None) -> SphereQuadrature:
    """
    Rule on the open hemisphere S^+ of R^q.

    q = 2: midpoint rule on theta in [rotation, rotation + pi) with
    omega = (cos theta, sin theta).  q >= 3: the full-sphere product rule
    with an even number of polar nodes, restricted to omega[axis] > 0.

    Raises:
        ServiceException: If q < 2 or level < 0
    """
    _check_level(level)
    if q < 2:
        raise ServiceException(message=f"Sphere rules need q >= 2 (got q={q})", code='unsupported_sphere')
    if q == 2:
        count = 2 ** level
        theta = rotation + (np.arange(count) + 0.5) * np.pi / count
        nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return SphereQuadrature(q=q, level=level, nodes=nodes, weights=np.full(count, np.pi / count))
    directions, weights = unit_sphere_rule(q - 1, 2 ** (level + 1), 2 ** (level + 1))
    axis = q - 1 if axis is None else axis
    directions = np.roll(directions, axis - (q - 1), axis=1)
    upper = directions[:, axis] > 0
    return SphereQuadrature(q=q, level=level, nodes=directions[upper], weights=weights[upper])


def pv_excise(
    rule: Union[SliceQuadrature, QuadratureRule],
    x_plus: Sequence[float],
    x_minus: Sequence[float],
    eps: float,
) -> Union[SliceQuadrature, QuadratureRule]:
    """
    Drop nodes within eps of either singular point; weights are kept as they are.

    Raises:
        ServiceException: If eps < 0 or the excision leaves a rule empty
    """
    if eps < 0:
        raise ServiceException(message=f"Excision radius must be >= 0 (got {eps})", code='invalid_operator_context')
    if isinstance(rule, SliceQuadrature):
        return SliceQuadrature(
            level=rule.level,
            boundary=None if rule.boundary is None else pv_excise(rule.boundary, x_plus, x_minus, eps),
            volume=None if rule.volume is None else pv_excise(rule.volume, x_plus, x_minus, eps),
        )
    if eps == 0:
        return rule
    near_plus = np.linalg.norm(rule.nodes - np.asarray(x_plus, dtype=float), axis=1) < eps
    near_minus = np.linalg.norm(rule.nodes - np.asarray(x_minus, dtype=float), axis=1) < eps
    keep = ~(near_plus | near_minus)
    if not np.any(keep):
        raise ServiceException(message=f"Excision radius {eps:g} empties the rule", code='empty_rule')
    return rule.subset(keep)


def build_centered_volume_rule(domain: MirroredBallDomain, center: Sequence[float], level: int) -> CenteredRule:
    """
    Rays from an interior stem point to the sphere of the r > 0 ball.

    Raises:
        ServiceException: If center is not inside the ball
    """
    _check_level(level)
    center = np.asarray(center, dtype=float)
    offset = center - domain.stem_center
    inside = domain.rho ** 2 - float(offset @ offset)
    if inside <= 0:
        raise ServiceException(message="Centred volume rule needs an interior point", code='not_interior')
    m = domain.stem_dim
    n_polar, n_azimuth, n_radial = _rule_sizes(level)
    directions, w_dir = unit_sphere_rule(m - 1, n_polar, n_azimuth)
    along = directions @ offset
    reach = -along + np.sqrt(along ** 2 + inside)
    x, w_x = roots_legendre(n_radial)
    radii = reach[:, None] * (x[None, :] + 1.0) / 2.0
    radial_weights = reach[:, None] * w_x[None, :] / 2.0
    return CenteredRule(center, directions, w_dir, radii, radial_weights, reach)


def build_pole_boundary_rule(domain: MirroredBallDomain, pole: Sequence[float], level: int) -> QuadratureRule:
    """
    Sphere rule of the r > 0 ball whose polar axis points at a boundary point.

    Gauss-Legendre in the angle theta from the pole (including sin^(m-2)
    theta) times a rule on the orthogonal S^(m-2), so integrands with an
    O(1/theta) singularity at the pole cancel in the azimuthal sum.
    """
    _check_level(level)
    m = domain.stem_dim
    pole = np.asarray(pole, dtype=float)
    axis = pole - domain.stem_center
    axis = axis / np.linalg.norm(axis)
    n_polar, n_azimuth, _ = _rule_sizes(level)
    x, w_x = roots_legendre(n_polar)
    theta = np.pi * (x + 1.0) / 2.0
    w_theta = np.pi * w_x / 2.0 * np.sin(theta) ** (m - 2)
    lower, w_lower = unit_sphere_rule(m - 2, n_polar, n_azimuth)
    frame, _ = np.linalg.qr(np.column_stack([axis, np.eye(m)]))
    complement = frame[:, 1:m]
    tangent = lower @ complement.T
    directions = (
        np.cos(theta)[:, None, None] * axis[None, None, :]
        + np.sin(theta)[:, None, None] * tangent[None, :, :]
    ).reshape(-1, m)
    weights = (w_theta[:, None] * w_lower[None, :]).reshape(-1) * domain.rho ** (m - 1)
    return QuadratureRule(
        nodes=domain.stem_center + domain.rho * directions,
        weights=weights,
        normals=directions,
        mesh_spacing=mesh_spacing(domain, level),
    )
