"""
Integral Operators

This module provides the integral operators on a p-symmetric domain Omega_D:
- OperatorContext: algebra, domain, slice and sphere rules, PV settings
- IntegralOperatorService: Cauchy boundary operator F, slice and full
  Teodorescu transforms and their closed-form derivatives, the
  Cauchy-Pompeiu residual, the Plemelj operator S with projections P, Q and
  the jump relations, L^2 inner products, L^t norms and the Hodge
  orthogonality residual

Every slice-level quantity has the form A(x_p, r) + eta*B(x_p, r): for a
direction d the ball integrals at the stem points z = (x_p, r) (singular
image x_d) and z' = (x_p, -r) (image x_{-d}) give N_d, F_d, and
alpha_d N_d + beta_d F_d summed over d = +-omega equals
(1/2) sum (N_d + F_d) + eta * (1/2) sum d (F_d - N_d).

Slice operators carry the factor 2 fixed by
T_{Omega_D} = sigma_{q-1}^{-1} int_{S^+} T_{Omega_omega} dS_omega, so that
vartheta-bar T_{Omega_omega} = 2I and vartheta-bar T_{Omega_D} = I.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .base_service import BaseService, ServiceException, service_setting
from .clifford_core import AlgebraSignature, CliffordAlgebra, Multivector, SplitPoint
from .domains_quadrature import (
    MirroredBallDomain,
    SliceQuadrature,
    SphereQuadrature,
    build_centered_volume_rule,
    build_pole_boundary_rule,
    build_slice_rules,
    build_sphere_rule,
    build_volume_rule,
    mesh_spacing,
    pv_excise,
)
from .kernels import (
    SurfaceConstants,
    embed_stem_vectors,
    gps_kernel_batch,
    slice_kernel,
    slice_kernel_derivative,
)
from .stem_slice import SliceFunction, StemFunction, radial_weight, vartheta_stem

logger = logging.getLogger(__name__)

PV_MODES = ('polar', 'excise')
BOUNDARY_TOLERANCE = 1e-9
NEAR_BOUNDARY_FRACTION = 0.5
NORM_RULE_LEVEL = 2
_CACHE_LIMIT = 256

Pair = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True, eq=False)
class OperatorContext:
    """Everything an operator evaluation depends on; immutable."""

    signature: AlgebraSignature
    domain: MirroredBallDomain
    slice_rules: SliceQuadrature
    sphere_rule: SphereQuadrature
    pv_epsilon: float
    fd_step: float = 1e-3
    t: float = 2.0
    pv_mode: str = 'polar'

    def __post_init__(self):
        if self.domain.p != self.signature.p:
            raise ServiceException(
                message=f"Domain lives in R^{self.domain.p + 2}, signature needs R^{self.signature.p + 2}",
                code='invalid_operator_context',
            )
        if self.sphere_rule.q != self.signature.q:
            raise ServiceException(message="Sphere rule dimension differs from q", code='invalid_operator_context')
        if self.slice_rules.boundary is None or self.slice_rules.volume is None:
            raise ServiceException(message="Operators need both boundary and volume rules", code='invalid_operator_context')
        if self.pv_mode not in PV_MODES:
            raise ServiceException(message=f"pv_mode must be one of {PV_MODES}", code='invalid_operator_context')
        if self.pv_epsilon < 2 * self.slice_rules.mesh_spacing:
            raise ServiceException(
                message=(
                    f"pv_epsilon={self.pv_epsilon:g} is below twice the mesh spacing "
                    f"{self.slice_rules.mesh_spacing:g}"
                ),
                code='invalid_operator_context',
            )

    @property
    def level(self) -> int:
        return self.slice_rules.level

    @classmethod
    def build(
        cls,
        signature: AlgebraSignature,
        domain: MirroredBallDomain,
        level: int,
        sphere_level: Optional[int] = None,
        pv_factor: float = 2.0,
        fd_step: Optional[float] = None,
        pv_mode: str = 'polar',
        sphere_rotation: float = 0.0,
        t: float = 2.0,
    ) -> 'OperatorContext':
        sphere_level = service_setting('GPS_SPHERE_LEVEL', 2) if sphere_level is None else sphere_level
        fd_step = service_setting('GPS_OPERATOR_FD_STEP', 1e-3) if fd_step is None else fd_step
        return cls(
            signature=signature,
            domain=domain,
            slice_rules=build_slice_rules(domain, level),
            sphere_rule=build_sphere_rule(signature.q, sphere_level, rotation=sphere_rotation),
            pv_epsilon=pv_factor * mesh_spacing(domain, level),
            fd_step=fd_step,
            t=t,
            pv_mode=pv_mode,
        )

    def with_pv_mode(self, pv_mode: str) -> 'OperatorContext':
        return replace(self, pv_mode=pv_mode)

    def with_sphere_rule(self, sphere_rule: SphereQuadrature) -> 'OperatorContext':
        return replace(self, sphere_rule=sphere_rule)


class IntegralOperatorService(BaseService):
    """
    Integral operators bound to one OperatorContext.

    Instances cache function values on rule nodes and singularity-centred
    rules; use one instance per thread.
    """

    def __init__(self, ctx: OperatorContext):
        super().__init__(label=f"level {ctx.level}")
        self.ctx = ctx
        self.algebra = CliffordAlgebra.for_signature(ctx.signature)
        self.p1 = ctx.signature.p + 1
        self.m = ctx.signature.p + 2
        self.sigma_slice = SurfaceConstants.sigma(self.m - 1)
        self.sigma_sphere = SurfaceConstants.sigma(ctx.signature.q - 1)
        self._value_cache: Dict[tuple, tuple] = {}
        self._rule_cache: Dict[tuple, object] = {}

    # ------------------------------------------------------------------
    # plumbing

    def _check_point(self, x: SplitPoint):
        if x.signature != self.ctx.signature:
            raise ServiceException(message="Point signature differs from the context", code='signature_mismatch')
        if x.r <= 0.0:
            raise ServiceException(message="Operators are evaluated off R^(p+1) only (|x_q| > 0)", code='invalid_point')

    def _check_direction(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if omega.shape != (self.ctx.signature.q,) or not np.isclose(np.linalg.norm(omega), 1.0, atol=1e-12):
            raise ServiceException(message="omega must be a unit vector of R^q", code='invalid_point')
        return omega

    def _remember(self, store: Dict, key: tuple, build: Callable):
        if key not in store:
            if len(store) >= _CACHE_LIMIT:
                store.clear()
            store[key] = build()
        return store[key]

    def _slice_values(self, f: SliceFunction, stem_nodes: np.ndarray, direction: np.ndarray) -> np.ndarray:
        flat = stem_nodes.reshape(-1, self.m)
        values = f.evaluate_on_slice(flat[:, :self.p1], flat[:, self.p1], direction)
        return values.reshape(stem_nodes.shape[:-1] + (self.algebra.dim,))

    def _rule_values(self, f: SliceFunction, rule, direction: np.ndarray, tag: str) -> np.ndarray:
        key = (id(f), tag, direction.tobytes())
        return self._remember(
            self._value_cache, key,
            lambda: (f, self._slice_values(f, rule.nodes, direction)),
        )[1]

    def _value(self, pair: Pair, eta: np.ndarray) -> np.ndarray:
        first, second = pair
        return first + self.algebra.product(self.algebra.embed_sphere(eta), second)

    def _is_inside(self, z: np.ndarray) -> bool:
        return self.ctx.domain.boundary_gap(z) > 0.0

    def _singular_points(self, x_p: np.ndarray, r: float) -> Tuple[np.ndarray, np.ndarray]:
        return np.append(x_p, r), np.append(x_p, -r)

    # ------------------------------------------------------------------
    # single-ball integrals on the slice of one direction d

    def _centered_rule(self, z: np.ndarray):
        return self._remember(
            self._rule_cache, ('centered', z.tobytes()),
            lambda: build_centered_volume_rule(self.ctx.domain, z, self.ctx.level),
        )

    def _volume_integral(self, f: SliceFunction, z: np.ndarray, d: np.ndarray, singular) -> np.ndarray:
        """int_B E(y - z) f(y_d) dy over the r > 0 ball on the slice of d."""
        algebra = self.algebra
        if self.ctx.pv_mode == 'polar' and self._is_inside(z):
            rule = self._centered_rule(z)
            values = self._slice_values(f, rule.points(), d)
            inner = np.einsum('us,usk->uk', rule.radial_weights, values)
            rays = algebra.conjugate(embed_stem_vectors(algebra, rule.directions, d))
            return rule.direction_weights @ algebra.product(rays, inner) / self.sigma_slice
        rule = self.ctx.slice_rules.volume
        if self.ctx.pv_mode == 'excise':
            excised = pv_excise(rule, singular[0], singular[1], self.ctx.pv_epsilon)
            values = self._slice_values(f, excised.nodes, d) if len(excised) != len(rule) else self._rule_values(f, rule, d, 'volume')
            rule = excised
        else:
            values = self._rule_values(f, rule, d, 'volume')
        kernel = slice_kernel(algebra, rule.nodes - z, d)
        return rule.integrate(algebra.product(kernel, values))

    def _volume_derivative(self, f: SliceFunction, z: np.ndarray, d: np.ndarray, move: np.ndarray, singular) -> np.ndarray:
        """
        Derivative of int_B E(y - z) f(y_d) dy as z moves along `move`.

        Principal value plus the jump -conj(v) f(z_d) / m when z is inside.
        """
        algebra = self.algebra
        inside = self._is_inside(z)
        if self.ctx.pv_mode == 'polar' and inside:
            rule = self._centered_rule(z)
            values = self._slice_values(f, rule.points(), d)
            at_center = self._slice_values(f, z[None, :], d)[0]
            inner = np.einsum('us,usk->uk', rule.radial_weights / rule.radii, values - at_center)
            inner += np.log(rule.reach)[:, None] * at_center
            rays = algebra.conjugate(embed_stem_vectors(algebra, rule.directions, d))
            moved = algebra.conjugate(embed_stem_vectors(algebra, move, d))
            strength = -(moved[None, :] - self.m * rays * (rule.directions @ move)[:, None]) / self.sigma_slice
            value = rule.direction_weights @ algebra.product(strength, inner)
        else:
            rule = self.ctx.slice_rules.volume
            if self.ctx.pv_mode == 'excise':
                rule = pv_excise(rule, singular[0], singular[1], self.ctx.pv_epsilon)
                values = self._slice_values(f, rule.nodes, d)
            else:
                values = self._rule_values(f, rule, d, 'volume')
            kernel = slice_kernel_derivative(algebra, rule.nodes - z, move, d)
            value = rule.integrate(algebra.product(kernel, values))
        if inside:
            at_center = self._slice_values(f, z[None, :], d)[0]
            moved = algebra.conjugate(embed_stem_vectors(algebra, move, d))
            value = value - algebra.product(moved, at_center) / self.m
        return value

    def _pole_rule(self, anchor: np.ndarray):
        return self._remember(
            self._rule_cache, ('pole', anchor.tobytes()),
            lambda: build_pole_boundary_rule(self.ctx.domain, anchor, self.ctx.level),
        )

    def _boundary_integral(self, u: SliceFunction, z: np.ndarray, d: np.ndarray, singular) -> np.ndarray:
        """
        int_{dB} E(y - z) n(y) u(y_d) dS over the r > 0 ball's sphere on the slice of d.

        On the sphere this is the principal value.
        """
        algebra = self.algebra
        domain = self.ctx.domain
        gap = domain.boundary_gap(z)
        on_boundary = abs(gap) <= BOUNDARY_TOLERANCE * domain.rho
        if self.ctx.pv_mode == 'polar' and abs(gap) < NEAR_BOUNDARY_FRACTION * domain.rho:
            anchor = z if on_boundary else domain.project_to_boundary(z)
            rule = self._pole_rule(anchor)
            values = self._slice_values(u, rule.nodes, d)
            anchor_value = self._slice_values(u, anchor[None, :], d)[0]
            kernel = slice_kernel(algebra, rule.nodes - z, d)
            normals = embed_stem_vectors(algebra, rule.normals, d)
            integrand = algebra.product(algebra.product(kernel, normals), values - anchor_value)
            flux = 0.5 if on_boundary else (1.0 if gap > 0 else 0.0)
            return rule.integrate(integrand) + flux * anchor_value
        rule = self.ctx.slice_rules.boundary
        if on_boundary:
            rule = pv_excise(rule, singular[0], singular[1], self.ctx.pv_epsilon)
            values = self._slice_values(u, rule.nodes, d)
        else:
            values = self._rule_values(u, rule, d, 'boundary')
        kernel = slice_kernel(algebra, rule.nodes - z, d)
        normals = embed_stem_vectors(algebra, rule.normals, d)
        return rule.integrate(algebra.product(algebra.product(kernel, normals), values))

    # ------------------------------------------------------------------
    # slice and sphere assembly

    def _slice_pair(self, integral: Callable, x_p: np.ndarray, r: float, omega: np.ndarray) -> Pair:
        """(A, B) of sum over d = +-omega of alpha_d N_d + beta_d F_d."""
        z_near, z_far = self._singular_points(x_p, r)
        singular = (z_near, z_far)
        first = np.zeros(self.algebra.dim)
        second = np.zeros(self.algebra.dim)
        for sign in (1.0, -1.0):
            d = sign * omega
            near = integral(z_near, d, 1.0, singular)
            far = integral(z_far, d, -1.0, singular)
            first += 0.5 * (near + far)
            second += 0.5 * self.algebra.product(self.algebra.embed_sphere(d), far - near)
        return first, second

    def _domain_pair(self, integral: Callable, x_p: np.ndarray, r: float) -> Pair:
        """sigma_{q-1}^{-1} sum over S^+ of the slice pairs."""
        sphere = self.ctx.sphere_rule
        first = np.zeros(self.algebra.dim)
        second = np.zeros(self.algebra.dim)
        for omega, weight in zip(sphere.nodes, sphere.weights):
            a, b = self._slice_pair(integral, x_p, r, omega)
            first += weight * a
            second += weight * b
        return first / self.sigma_sphere, second / self.sigma_sphere

    def _teodorescu_integral(self, f: SliceFunction) -> Callable:
        return lambda z, d, image, singular: self._volume_integral(f, z, d, singular)

    def _derivative_integral(self, f: SliceFunction, coordinate: Optional[int]) -> Callable:
        """Ball-integral derivative along x_i (i <= p) or, for None, along r."""
        if coordinate is None:
            unit = np.zeros(self.m)
            unit[-1] = 1.0
            return lambda z, d, image, singular: self._volume_derivative(f, z, d, image * unit, singular)
        unit = np.zeros(self.m)
        unit[coordinate] = 1.0
        return lambda z, d, image, singular: self._volume_derivative(f, z, d, unit, singular)

    def _boundary_integral_of(self, u: SliceFunction) -> Callable:
        return lambda z, d, image, singular: self._boundary_integral(u, z, d, singular)

    # ------------------------------------------------------------------
    # Cauchy and Teodorescu operators

    def ball_teodorescu(self, f: SliceFunction, z, direction) -> Multivector:
        """-int_B E(y - z) f(y_d) dy over the r > 0 ball on the slice of a direction."""
        z = np.asarray(z, dtype=float)
        d = self._check_direction(direction)
        value = self._volume_integral(f, z, d, self._singular_points(z[:-1], z[-1]))
        return Multivector(self.ctx.signature, -value)

    def cauchy_boundary_stem(self, f: SliceFunction, x_p, r: float) -> Pair:
        pair = self._domain_pair(self._boundary_integral_of(f), np.asarray(x_p, dtype=float), float(r))
        return 2.0 * pair[0], 2.0 * pair[1]

    def cauchy_boundary_F(self, f: SliceFunction, x: SplitPoint) -> Multivector:
        """
        F f(x) = int_{dOmega_D} 2K_y(x) n(y) f(y) dS(y), sphere-decomposed.

        Raises:
            ServiceException: If x lies on the boundary (use plemelj_S)
        """
        self._check_point(x)
        if abs(self.ctx.domain.boundary_gap(x.stem)) <= BOUNDARY_TOLERANCE * self.ctx.domain.rho:
            raise ServiceException(message="x lies on the boundary; use plemelj_S", code='on_boundary')
        return Multivector(self.ctx.signature, self._value(self.cauchy_boundary_stem(f, x.x_p, x.r), x.omega))

    def teodorescu_stem(self, f: SliceFunction, x_p, r: float) -> Pair:
        first, second = self._domain_pair(self._teodorescu_integral(f), np.asarray(x_p, dtype=float), float(r))
        return -2.0 * first, -2.0 * second

    def teodorescu_slice(self, f: SliceFunction, omega, x: SplitPoint) -> Multivector:
        """T_{Omega_omega} f(x) = -2 int_{Omega_omega} E_y(x) f(y) dsigma_omega(y)."""
        self._check_point(x)
        omega = self._check_direction(omega)
        first, second = self._slice_pair(self._teodorescu_integral(f), x.x_p, x.r, omega)
        return Multivector(self.ctx.signature, -2.0 * self._value((first, second), x.omega))

    def teodorescu_full(self, f: SliceFunction, x: SplitPoint, path: str = 'slices') -> Multivector:
        """
        T_{Omega_D} f(x), as the S^+ average of slice transforms or directly.

        path='direct' integrates -2K_y(x) f(y) over the r^{q-1}-weighted full
        rule with node excision; it agrees with path='slices' when the
        context uses pv_mode='excise'.
        """
        self._check_point(x)
        if path == 'direct':
            return self.teodorescu_direct(f, x)
        if path != 'slices':
            raise ServiceException(message=f"Unknown path '{path}'", code='invalid_operator_context')
        return Multivector(self.ctx.signature, self._value(self.teodorescu_stem(f, x.x_p, x.r), x.omega))

    def teodorescu_direct(self, f: SliceFunction, x: SplitPoint) -> Multivector:
        self._check_point(x)
        algebra = self.algebra
        q = self.ctx.signature.q
        singular = self._singular_points(x.x_p, x.r)
        rule = pv_excise(self.ctx.slice_rules.volume, singular[0], singular[1], self.ctx.pv_epsilon)
        heights = rule.nodes[:, -1]
        total = np.zeros(algebra.dim)
        for omega, w_omega in zip(self.ctx.sphere_rule.nodes, self.ctx.sphere_rule.weights):
            for d in (omega, -omega):
                points = np.concatenate([rule.nodes[:, :self.p1], heights[:, None] * d[None, :]], axis=1)
                kernel = 2.0 * gps_kernel_batch(algebra, points, x) / (self.sigma_sphere * heights[:, None] ** (q - 1))
                values = self._slice_values(f, rule.nodes, d)
                weights = w_omega * rule.weights * heights ** (q - 1)
                total += weights @ algebra.product(kernel, values)
        return Multivector(self.ctx.signature, -total)

    def _derivative_pair(self, f: SliceFunction, coordinate: Optional[int], x: SplitPoint, omega=None) -> Pair:
        integral = self._derivative_integral(f, coordinate)
        if omega is None:
            first, second = self._domain_pair(integral, x.x_p, x.r)
        else:
            first, second = self._slice_pair(integral, x.x_p, x.r, omega)
        return -2.0 * first, -2.0 * second

    def _check_p_index(self, i: int):
        if not 0 <= i <= self.ctx.signature.p:
            raise ServiceException(message=f"x_p index {i} outside 0..{self.ctx.signature.p}", code='invalid_point')

    def _check_q_index(self, i: int):
        p, q = self.ctx.signature.p, self.ctx.signature.q
        if not p + 1 <= i <= p + q:
            raise ServiceException(message=f"x_q index {i} outside {p + 1}..{p + q}", code='invalid_point')

    def teodorescu_derivative_p(self, f: SliceFunction, omega, x: SplitPoint, i: int) -> Multivector:
        """
        d/dx_i T_{Omega_omega} f(x), i = 0..p.

        2[-PV int d_i E_y(x) f dsigma_omega + conj(e_i)(alpha f(x_omega) + beta f(x_{-omega}))/(p+2)]
        """
        self._check_point(x)
        self._check_p_index(i)
        omega = self._check_direction(omega)
        return Multivector(self.ctx.signature, self._value(self._derivative_pair(f, i, x, omega), x.omega))

    def teodorescu_radial(self, f: SliceFunction, omega, x: SplitPoint) -> Multivector:
        """d/dr T_{Omega_omega} f(x_p + r eta) at fixed eta."""
        self._check_point(x)
        omega = self._check_direction(omega)
        return Multivector(self.ctx.signature, self._value(self._derivative_pair(f, None, x, omega), x.omega))

    def _q_derivative(self, f: SliceFunction, x: SplitPoint, i: int, omega=None) -> np.ndarray:
        k = i - self.p1
        radial = self._value(self._derivative_pair(f, None, x, omega), x.omega)
        if omega is None:
            _, second = self.teodorescu_stem(f, x.x_p, x.r)
        else:
            _, second = self._slice_pair(self._teodorescu_integral(f), x.x_p, x.r, omega)
            second = -2.0 * second
        unit = np.zeros(self.ctx.signature.q)
        unit[k] = 1.0
        turn = (unit - x.omega[k] * x.omega) / x.r
        return (x.x_q[k] / x.r) * radial + self.algebra.product(self.algebra.embed_sphere(turn), second)

    def teodorescu_derivative_q(self, f: SliceFunction, omega, x: SplitPoint, i: int) -> Multivector:
        """
        d/dx_i T_{Omega_omega} f(x), i = p+1..p+q.

        (x_i/r) d_r T + (d_i eta) B_T, where T = A_T + eta B_T.
        """
        self._check_point(x)
        self._check_q_index(i)
        omega = self._check_direction(omega)
        return Multivector(self.ctx.signature, self._q_derivative(f, x, i, omega))

    def teodorescu_full_derivative(self, f: SliceFunction, x: SplitPoint, i: int) -> Multivector:
        """d/dx_i T_{Omega_D} f(x) for any coordinate index i."""
        self._check_point(x)
        if i <= self.ctx.signature.p:
            self._check_p_index(i)
            return Multivector(self.ctx.signature, self._value(self._derivative_pair(f, i, x), x.omega))
        self._check_q_index(i)
        return Multivector(self.ctx.signature, self._q_derivative(f, x, i))

    def cauchy_pompeiu_residual(self, f: SliceFunction, x: SplitPoint, h: float = 1e-5) -> float:
        """
        |F f(x) + T(vartheta-bar f)(x) - f(x)| for a stem-induced f.

        Raises:
            ServiceException: If f is raw
        """
        self._check_point(x)
        if f.kind != 'stem':
            raise ServiceException(message="Cauchy-Pompeiu needs a stem-induced function", code='invalid_stem')
        derivative = SliceFunction(self.ctx.signature, stem=vartheta_stem(f.stem, h), name=f"vartheta({f.name})")
        total = self.cauchy_boundary_F(f, x) + self.teodorescu_full(derivative, x) - f(x)
        return total.norm()

    # ------------------------------------------------------------------
    # Plemelj operators

    def _check_boundary_point(self, x: SplitPoint):
        self._check_point(x)
        gap = self.ctx.domain.boundary_gap(x.stem)
        if abs(gap) > BOUNDARY_TOLERANCE * self.ctx.domain.rho:
            raise ServiceException(message=f"x is not on the boundary (gap {gap:g})", code='not_on_boundary')

    def plemelj_stem(self, u: SliceFunction, x_p, r: float) -> Pair:
        """(A, B) of S u at the boundary stem point (x_p, r)."""
        first, second = self._domain_pair(self._boundary_integral_of(u), np.asarray(x_p, dtype=float), float(r))
        return 4.0 * first, 4.0 * second

    def plemelj_S(self, u: SliceFunction, x: SplitPoint) -> Multivector:
        """S u(x) = 2 PV int_{dOmega_D} 2K_y(x) n(y) u(y) dS(y) at a boundary point."""
        self._check_boundary_point(x)
        return Multivector(self.ctx.signature, self._value(self.plemelj_stem(u, x.x_p, x.r), x.omega))

    def plemelj_image(self, u: SliceFunction) -> SliceFunction:
        """S u as a slice function on the boundary, evaluated lazily."""
        dim = self.algebra.dim
        known: Dict[bytes, Pair] = {}

        def pairs(x_p, r):
            out_first = np.zeros((len(r), dim))
            out_second = np.zeros((len(r), dim))
            for k, (point, radius) in enumerate(zip(x_p, r)):
                key = np.append(point, abs(radius)).tobytes()
                if key not in known:
                    known[key] = self.plemelj_stem(u, point, abs(radius))
                first, second = known[key]
                out_first[k] = first
                out_second[k] = np.sign(radius) * second
            return out_first, out_second

        stem = StemFunction(
            self.ctx.signature,
            f1=lambda x_p, r: pairs(x_p, r)[0],
            f2=lambda x_p, r: pairs(x_p, r)[1],
            domain_hint=self.ctx.domain,
            name=f"S({u.name})",
        )
        return SliceFunction(self.ctx.signature, stem=stem, name=stem.name)

    def plemelj_projections(self, u: SliceFunction, x: SplitPoint) -> Tuple[Multivector, Multivector]:
        """(P u(x), Q u(x)) with P = (I + S)/2 and Q = u - P u."""
        image = self.plemelj_S(u, x)
        value = u(x)
        projected = (value + image) * 0.5
        return projected, value - projected

    def plemelj_P(self, u: SliceFunction, x: SplitPoint) -> Multivector:
        return self.plemelj_projections(u, x)[0]

    def plemelj_Q(self, u: SliceFunction, x: SplitPoint) -> Multivector:
        return self.plemelj_projections(u, x)[1]

    def plemelj_jump(self, f: SliceFunction, x: SplitPoint, path_steps: int = 3, side: str = 'interior') -> Tuple[Multivector, Multivector]:
        """
        Boundary limit of F f along the normal and the Plemelj value.

        Returns (limit, PV + f/2) for side='interior' and (limit, PV - f/2)
        for side='exterior'; the limit is the Richardson extrapolation of the
        two closest path values, PV = S f / 2.

        Raises:
            ServiceException: If x is off the boundary or the path leaves
                the required side
        """
        self._check_boundary_point(x)
        if side not in ('interior', 'exterior'):
            raise ServiceException(message=f"Unknown side '{side}'", code='invalid_operator_context')
        if path_steps < 2:
            raise ServiceException(message="plemelj_jump needs at least two path steps", code='invalid_operator_context')
        domain = self.ctx.domain
        normal = (x.stem - domain.stem_center) / domain.rho
        direction = -1.0 if side == 'interior' else 1.0
        values = []
        for k in range(2, path_steps + 2):
            stem = x.stem + direction * (2.0 ** -k) * domain.rho * normal
            inside = domain.boundary_gap(stem) > 0
            if stem[-1] <= 0 or inside != (side == 'interior'):
                raise ServiceException(message=f"Approach path leaves the {side} at step {k}", code='path_exits_domain')
            values.append(self._value(self.cauchy_boundary_stem(f, stem[:-1], stem[-1]), x.omega))
        limit = 2.0 * values[-1] - values[-2]
        half = 0.5 * self._value(self.plemelj_stem(f, x.x_p, x.r), x.omega)
        value = f(x).coeffs
        target = half + 0.5 * value if side == 'interior' else half - 0.5 * value
        return Multivector(self.ctx.signature, limit), Multivector(self.ctx.signature, target)

    # ------------------------------------------------------------------
    # function-space quantities on Omega_D

    def _domain_nodes(self, level: Optional[int] = None):
        """(points, stem nodes, weights, d) over S^+ and its antipodes, dsigma = r^{q-1} dsigma_omega dS_omega."""
        if level is None or level == self.ctx.level:
            rule = self.ctx.slice_rules.volume
        else:
            rule = build_volume_rule(self.ctx.domain, level).volume
        q = self.ctx.signature.q
        heights = rule.nodes[:, -1]
        for omega, w_omega in zip(self.ctx.sphere_rule.nodes, self.ctx.sphere_rule.weights):
            for d in (omega, -omega):
                points = np.concatenate([rule.nodes[:, :self.p1], heights[:, None] * d[None, :]], axis=1)
                yield points, rule.nodes, w_omega * rule.weights * heights ** (q - 1), d

    def inner_product(self, f: SliceFunction, g: SliceFunction) -> Multivector:
        """<f, g> = int_{Omega_D} conj(f) g dsigma."""
        total = np.zeros(self.algebra.dim)
        for _, nodes, weights, d in self._domain_nodes():
            left = self._slice_values(f, nodes, d)
            right = self._slice_values(g, nodes, d)
            total += weights @ self.algebra.product(self.algebra.conjugate(left), right)
        return Multivector(self.ctx.signature, total)

    def lt_norm(self, f: SliceFunction, t: Optional[float] = None) -> float:
        """(int_{Omega_D} |f|^t dsigma)^{1/t}."""
        t = self.ctx.t if t is None else float(t)
        if not t > 1.0:
            raise ServiceException(message=f"L^t norms need t > 1 (got {t})", code='invalid_exponent')
        total = 0.0
        for _, nodes, weights, d in self._domain_nodes():
            total += float(weights @ self.algebra.norm(self._slice_values(f, nodes, d)) ** t)
        return total ** (1.0 / t)

    def hodge_orthogonality_residual(self, x: SplitPoint, g: SliceFunction, allow_interior: bool = False) -> float:
        """
        |<phi, |y_q|^{1-q} vartheta-bar g>| / (||phi|| ||.||), phi(y) = conj(E_y(x)) / sigma_{q-1}.

        Raises:
            ServiceException: If g is raw or degenerate, or x is not exterior
                (unless allow_interior)
        """
        self._check_point(x)
        if g.kind != 'stem':
            raise ServiceException(message="Hodge residual needs a stem-induced g", code='invalid_stem')
        if not allow_interior and self.ctx.domain.boundary_gap(x.stem) >= 0:
            raise ServiceException(message="The kernel functional needs a point outside the closed domain", code='not_exterior')
        derivative = SliceFunction(self.ctx.signature, stem=vartheta_stem(g.stem), name=f"vartheta({g.name})")
        weighted = radial_weight(derivative, 1 - self.ctx.signature.q)
        algebra = self.algebra
        pairing = np.zeros(algebra.dim)
        phi_norm = 0.0
        weighted_norm = 0.0
        for points, nodes, weights, d in self._domain_nodes():
            phi = algebra.conjugate(gps_kernel_batch(algebra, points, x)) / self.sigma_sphere
            values = self._slice_values(weighted, nodes, d)
            pairing += weights @ algebra.product(algebra.conjugate(phi), values)
            phi_norm += float(weights @ np.sum(phi ** 2, axis=1))
            weighted_norm += float(weights @ np.sum(values ** 2, axis=1))
        if weighted_norm <= 1e-28:
            raise ServiceException(message=f"vartheta-bar {g.name} vanishes; nothing to test", code='degenerate_function')
        residual = float(algebra.norm(pairing)) / np.sqrt(phi_norm * weighted_norm)
        self.logger.debug(f"Hodge residual at {x.stem}: {residual:.3e}")
        return residual

    def operator_norm_ratio(self, f: SliceFunction, level: Optional[int] = None) -> float:
        """Empirical ||T_{Omega_D} f||_{L^2} / ||f||_{L^2} on a coarse volume rule."""
        level = min(self.ctx.level, NORM_RULE_LEVEL) if level is None else level
        rule = build_volume_rule(self.ctx.domain, level).volume
        pairs = [self.teodorescu_stem(f, node[:-1], node[-1]) for node in rule.nodes]
        firsts = np.stack([pair[0] for pair in pairs])
        seconds = np.stack([pair[1] for pair in pairs])
        image_total = 0.0
        source_total = 0.0
        for _, nodes, weights, d in self._domain_nodes(level):
            image = firsts + self.algebra.product(self.algebra.embed_sphere(d), seconds)
            image_total += float(weights @ np.sum(image ** 2, axis=1))
            source_total += float(weights @ np.sum(self._slice_values(f, nodes, d) ** 2, axis=1))
        if source_total == 0.0:
            raise ServiceException(message=f"{f.name} vanishes; the ratio is undefined", code='degenerate_function')
        return float(np.sqrt(image_total / source_total))

    def as_slice_function(self, evaluator: Callable[[SplitPoint], Multivector], name: str) -> SliceFunction:
        """Wrap a pointwise operator image x -> (Op f)(x) as a raw slice function."""
        signature = self.ctx.signature

        def raw(points):
            return np.stack([evaluator(SplitPoint.from_coordinates(signature, row)).coeffs for row in points])

        return SliceFunction(signature, raw=raw, name=name)
