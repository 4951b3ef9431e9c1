"""
Cauchy Kernels

This module provides the kernels of the integral operators:
- SurfaceConstants: areas sigma_m of unit spheres
- KernelCoefficients alpha = (1 - eta*omega)/2, beta = (1 + eta*omega)/2
- The slice Cauchy kernel E, the generalized partial-slice kernel
  E_y(x) and its weighted form K_y(x)
- Batched forms on stem-coordinate offsets, used by integral_ops

Throughout, eta is the direction of the evaluation point x and omega the
direction of the integration point y.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma

from .base_service import ServiceException
from .clifford_core import AlgebraSignature, CliffordAlgebra, Multivector, SplitPoint

logger = logging.getLogger(__name__)

SLICE_TOLERANCE = 1e-12


class SurfaceConstants:
    """Surface areas of unit spheres."""

    @staticmethod
    @lru_cache(maxsize=None)
    def sigma(m: int) -> float:
        """Area 2*pi^((m+1)/2) / Gamma((m+1)/2) of the unit m-sphere in R^{m+1}."""
        if m < 0:
            raise ServiceException(message=f"Sphere dimension must be >= 0 (got {m})", code='invalid_signature')
        return 2.0 * math.pi ** ((m + 1) / 2) / float(gamma((m + 1) / 2))


@dataclass(frozen=True, eq=False)
class KernelCoefficients:
    alpha: Multivector
    beta: Multivector


def coefficient_arrays(algebra: CliffordAlgebra, eta: np.ndarray, directions: np.ndarray):
    """alpha and beta coefficient arrays for one eta against directions of shape (M, q)."""
    eta_omega = algebra.product(algebra.embed_sphere(np.asarray(eta, dtype=float)), algebra.embed_sphere(directions))
    one = algebra.scalar(1.0)
    return 0.5 * (one - eta_omega), 0.5 * (one + eta_omega)


def kernel_coefficients(signature: AlgebraSignature, eta, omega) -> KernelCoefficients:
    """alpha, beta for x-direction eta and y-direction omega."""
    algebra = CliffordAlgebra.for_signature(signature)
    alpha, beta = coefficient_arrays(algebra, np.asarray(eta, dtype=float), np.asarray(omega, dtype=float)[None, :])
    return KernelCoefficients(Multivector(signature, alpha[0]), Multivector(signature, beta[0]))


def embed_stem_vectors(algebra: CliffordAlgebra, vectors: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Paravectors of stem-coordinate vectors (v_p, v_t) on the slice of a direction: v_p + v_t*direction."""
    vectors = np.asarray(vectors, dtype=float)
    p1 = algebra.signature.p + 1
    coords = np.concatenate([vectors[..., :p1], vectors[..., p1:p1 + 1] * np.asarray(direction, dtype=float)], axis=-1)
    return algebra.embed(coords)


def _paravector_kernel(algebra: CliffordAlgebra, paravectors: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    m = algebra.signature.p + 2
    sigma = SurfaceConstants.sigma(m - 1)
    return algebra.conjugate(paravectors) / (sigma * lengths[..., None] ** m)


def slice_kernel(algebra: CliffordAlgebra, offsets: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """E(y - z) for stem-coordinate offsets y - z on the slice of a direction."""
    offsets = np.asarray(offsets, dtype=float)
    return _paravector_kernel(algebra, embed_stem_vectors(algebra, offsets, direction), np.linalg.norm(offsets, axis=-1))


def slice_kernel_derivative(algebra: CliffordAlgebra, offsets: np.ndarray, move: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """
    Derivative of E(y - z) as z moves along the stem vector `move`.

    -(1/sigma)[conj(v)/|w|^m - m conj(w)(w.v)/|w|^(m+2)] with w = y - z.
    """
    offsets = np.asarray(offsets, dtype=float)
    m = algebra.signature.p + 2
    sigma = SurfaceConstants.sigma(m - 1)
    lengths = np.linalg.norm(offsets, axis=-1)
    along = offsets @ np.asarray(move, dtype=float)
    moved = algebra.conjugate(embed_stem_vectors(algebra, np.asarray(move, dtype=float), direction))
    towards = algebra.conjugate(embed_stem_vectors(algebra, offsets, direction))
    return -(moved / lengths[..., None] ** m - m * towards * (along / lengths ** (m + 2))[..., None]) / sigma


def gps_kernel_batch(algebra: CliffordAlgebra, points: np.ndarray, x: SplitPoint) -> np.ndarray:
    """E_y(x) for many integration points y of shape (N, p+q+1), each on its own slice."""
    points = np.asarray(points, dtype=float)
    p1 = algebra.signature.p + 1
    y_q = points[:, p1:]
    r_y = np.linalg.norm(y_q, axis=1)
    if np.any(r_y == 0.0) or x.r == 0.0:
        raise ServiceException(message="E_y(x) is undefined for points on R^(p+1)", code='singular_kernel')
    directions = y_q / r_y[:, None]
    alpha, beta = coefficient_arrays(algebra, x.omega, directions)
    near = points - np.concatenate([np.broadcast_to(x.x_p, (len(points), p1)), x.r * directions], axis=1)
    far = points - np.concatenate([np.broadcast_to(x.x_p, (len(points), p1)), -x.r * directions], axis=1)
    near_kernel = _paravector_kernel(algebra, algebra.embed(near), np.linalg.norm(near, axis=1))
    far_kernel = _paravector_kernel(algebra, algebra.embed(far), np.linalg.norm(far, axis=1))
    return algebra.product(alpha, near_kernel) + algebra.product(beta, far_kernel)


def _on_slice(pt: SplitPoint, omega: np.ndarray) -> bool:
    along = float(pt.x_q @ omega)
    return np.linalg.norm(pt.x_q - along * omega) <= SLICE_TOLERANCE * (1.0 + np.linalg.norm(pt.x_q))


def cauchy_kernel_E(y: SplitPoint, x_target: SplitPoint, omega) -> Multivector:
    """
    E(y - x_target) = conj(d) / (sigma_{p+1} |d|^{p+2}) on the slice of omega.

    Raises:
        ServiceException: If a point is off the slice or the points coincide
    """
    omega = np.asarray(omega, dtype=float)
    if not (_on_slice(y, omega) and _on_slice(x_target, omega)):
        raise ServiceException(message="Both points must lie on the slice R^(p+1) + omega R", code='invalid_point')
    algebra = CliffordAlgebra.for_signature(y.signature)
    d = y.coordinates - x_target.coordinates
    length = np.linalg.norm(d)
    if length == 0.0:
        raise ServiceException(message="E is singular at coincident points", code='singular_kernel')
    return Multivector(y.signature, _paravector_kernel(algebra, algebra.embed(d), np.array(length)))


def gps_cauchy_kernel(y: SplitPoint, x: SplitPoint) -> Multivector:
    """
    E_y(x) = alpha E(y - x_omega) + beta E(y - x_{-omega}), x_{+-omega} = x_p +- r omega.

    Raises:
        ServiceException: If r = 0, |y_q| = 0 or y is a slice singular point of x
    """
    if x.r == 0.0 or y.r == 0.0:
        raise ServiceException(message="E_y(x) needs |x_q| > 0 and |y_q| > 0", code='singular_kernel')
    coefficients = kernel_coefficients(y.signature, x.omega, y.omega)
    near = cauchy_kernel_E(y, x.on_slice(y.omega), y.omega)
    far = cauchy_kernel_E(y, x.on_slice(-y.omega), y.omega)
    return coefficients.alpha * near + coefficients.beta * far


def weighted_kernel_K(y: SplitPoint, x: SplitPoint) -> Multivector:
    """K_y(x) = E_y(x) / (sigma_{q-1} |y_q|^{q-1})."""
    if y.r == 0.0:
        raise ServiceException(message="K_y(x) needs |y_q| > 0", code='singular_kernel')
    q = y.signature.q
    return gps_cauchy_kernel(y, x) / (SurfaceConstants.sigma(q - 1) * y.r ** (q - 1))
