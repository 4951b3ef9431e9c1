"""
Clifford Algebra Core

This module provides dense arithmetic in the real Clifford algebra R_{p+q}
whose generators e_1..e_n satisfy e_i e_j + e_j e_i = -2 delta_ij:
- AlgebraSignature and the cached per-signature CliffordAlgebra tables
- Batched coefficient-array operations used by the kernels and operators
- Multivector values, the SplitPoint view of points of R^{p+q+1}
- The public operations geometric_product, clifford_conjugate, reversion,
  norm, paravector_inverse and embed_point

Blade e_A is stored at the index whose set bits are A (bit i-1 <-> e_i);
index 0 is the scalar part.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .base_service import ServiceException

logger = logging.getLogger(__name__)

MAX_GENERATORS = 12
TABLE_GENERATORS = 8

_POPCOUNT = np.array([bin(i).count('1') for i in range(1 << MAX_GENERATORS)], dtype=np.int64)

Scalar = Union[int, float, np.floating]


@dataclass(frozen=True)
class AlgebraSignature:
    """Generator counts (p, q) of R_{p+q}."""

    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 2:
            raise ServiceException(
                message=f"Unsupported signature (p={self.p}, q={self.q}): need p >= 1 and q >= 2",
                code='invalid_signature',
            )
        if self.p + self.q > MAX_GENERATORS:
            raise ServiceException(
                message=f"Signature with n={self.p + self.q} generators exceeds {MAX_GENERATORS}",
                code='invalid_signature',
            )

    @property
    def n(self) -> int:
        return self.p + self.q

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def point_dim(self) -> int:
        """Dimension of R^{p+q+1}."""
        return self.n + 1

    @property
    def stem_dim(self) -> int:
        """Dimension of the stem space R^{p+2}."""
        return self.p + 2


def _reordering_parity(a: int, b: np.ndarray) -> np.ndarray:
    """Parity of the transpositions needed to sort e_A e_B, for one A against many B."""
    swaps = np.zeros_like(b)
    a >>= 1
    while a:
        swaps += _POPCOUNT[a & b]
        a >>= 1
    return swaps


def _sign_row(a: int, dim: int) -> np.ndarray:
    b = np.arange(dim, dtype=np.int64)
    exponent = _reordering_parity(a, b) + _POPCOUNT[a & b]
    return np.where(exponent % 2 == 0, 1.0, -1.0)


class CliffordAlgebra:
    """
    Cached multiplication data for one signature.

    All methods work on coefficient arrays of shape (..., 2^n) and
    broadcast over the leading axes.
    """

    def __init__(self, signature: AlgebraSignature):
        self.signature = signature
        self.dim = signature.dim
        self.grades = _POPCOUNT[:self.dim].copy()
        self._indices = np.arange(self.dim, dtype=np.int64)
        if signature.n <= TABLE_GENERATORS:
            self._sign_table = np.stack([_sign_row(a, self.dim) for a in range(self.dim)])
        else:
            self._sign_table = None
        self._conjugate_signs = np.where(((self.grades * (self.grades + 1)) // 2) % 2 == 0, 1.0, -1.0)
        self._reverse_signs = np.where(((self.grades * (self.grades - 1)) // 2) % 2 == 0, 1.0, -1.0)
        self._involute_signs = np.where(self.grades % 2 == 0, 1.0, -1.0)
        self.generator_index = np.array([0] + [1 << (i - 1) for i in range(1, signature.n + 1)])
        logger.debug(f"Built Clifford tables for R_{signature.n} (dim={self.dim})")

    @classmethod
    def for_signature(cls, signature: AlgebraSignature) -> 'CliffordAlgebra':
        return _algebra_for(signature)

    def sign_row(self, a: int) -> np.ndarray:
        if self._sign_table is not None:
            return self._sign_table[a]
        return _sign_row(a, self.dim)

    def product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Geometric product of coefficient arrays."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros(shape)
        for i in range(self.dim):
            column = a[..., i]
            if not np.any(column):
                continue
            out[..., i ^ self._indices] += column[..., None] * b * self.sign_row(i)
        return out

    def conjugate(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=float) * self._conjugate_signs

    def reverse(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=float) * self._reverse_signs

    def involute(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=float) * self._involute_signs

    def grade_part(self, a: np.ndarray, k: int) -> np.ndarray:
        return np.where(self.grades == k, np.asarray(a, dtype=float), 0.0)

    def norm(self, a: np.ndarray) -> np.ndarray:
        return np.sqrt(np.sum(np.square(a), axis=-1))

    def embed(self, coords: np.ndarray) -> np.ndarray:
        """Paravector x_0 + sum x_i e_i from coordinates of shape (..., n+1)."""
        coords = np.asarray(coords, dtype=float)
        if coords.shape[-1] != self.signature.point_dim:
            raise ServiceException(
                message=f"Expected {self.signature.point_dim} coordinates, got {coords.shape[-1]}",
                code='invalid_point',
            )
        out = np.zeros(coords.shape[:-1] + (self.dim,))
        out[..., self.generator_index] = coords
        return out

    def embed_split(self, x_p: np.ndarray, x_q: np.ndarray) -> np.ndarray:
        return self.embed(np.concatenate([np.asarray(x_p, dtype=float), np.asarray(x_q, dtype=float)], axis=-1))

    def embed_sphere(self, direction: np.ndarray) -> np.ndarray:
        """Grade-1 element sum omega_j e_{p+j} for omega in R^q."""
        direction = np.asarray(direction, dtype=float)
        out = np.zeros(direction.shape[:-1] + (self.dim,))
        out[..., self.generator_index[self.signature.p + 1:]] = direction
        return out

    def paravector_coordinates(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=float)[..., self.generator_index]

    def is_paravector(self, a: np.ndarray, tol: float = 0.0) -> np.ndarray:
        rest = np.where(self.grades > 1, np.abs(a), 0.0)
        return np.max(rest, axis=-1) <= tol

    def scalar(self, value: Scalar) -> np.ndarray:
        out = np.zeros(self.dim)
        out[0] = value
        return out


@lru_cache(maxsize=None)
def _algebra_for(signature: AlgebraSignature) -> CliffordAlgebra:
    return CliffordAlgebra(signature)


@dataclass(frozen=True, eq=False)
class Multivector:
    """Immutable element of R_{p+q}."""

    signature: AlgebraSignature
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (self.signature.dim,):
            raise ServiceException(
                message=f"Multivector needs {self.signature.dim} coefficients, got shape {coeffs.shape}",
                code='invalid_multivector',
            )
        if not np.all(np.isfinite(coeffs)):
            raise ServiceException(message="Multivector coefficients must be finite", code='invalid_multivector')
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def algebra(self) -> CliffordAlgebra:
        return CliffordAlgebra.for_signature(self.signature)

    @classmethod
    def zero(cls, signature: AlgebraSignature) -> 'Multivector':
        return cls(signature, np.zeros(signature.dim))

    @classmethod
    def scalar(cls, signature: AlgebraSignature, value: Scalar) -> 'Multivector':
        return cls(signature, CliffordAlgebra.for_signature(signature).scalar(value))

    @classmethod
    def basis(cls, signature: AlgebraSignature, *indices: int) -> 'Multivector':
        """Product e_{i1} e_{i2} ... of generators, in the given order."""
        algebra = CliffordAlgebra.for_signature(signature)
        out = algebra.scalar(1.0)
        for i in indices:
            if not 1 <= i <= signature.n:
                raise ServiceException(message=f"Generator index {i} out of range 1..{signature.n}", code='invalid_blade')
            generator = np.zeros(signature.dim)
            generator[1 << (i - 1)] = 1.0
            out = algebra.product(out, generator)
        return cls(signature, out)

    @classmethod
    def from_paravector(cls, signature: AlgebraSignature, coords: Sequence[float]) -> 'Multivector':
        return cls(signature, CliffordAlgebra.for_signature(signature).embed(np.asarray(coords, dtype=float)))

    def _coerce(self, other) -> Optional[np.ndarray]:
        if isinstance(other, Multivector):
            _check_same_signature(self, other)
            return other.coeffs
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.algebra.scalar(float(other))
        return None

    def __add__(self, other):
        coeffs = self._coerce(other)
        if coeffs is None:
            return NotImplemented
        return Multivector(self.signature, self.coeffs + coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        coeffs = self._coerce(other)
        if coeffs is None:
            return NotImplemented
        return Multivector(self.signature, self.coeffs - coeffs)

    def __rsub__(self, other):
        coeffs = self._coerce(other)
        if coeffs is None:
            return NotImplemented
        return Multivector(self.signature, coeffs - self.coeffs)

    def __neg__(self):
        return Multivector(self.signature, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.signature, self.coeffs * float(other))
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.signature, self.coeffs * float(other))
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.signature, self.coeffs / float(other))
        return NotImplemented

    def __repr__(self):
        terms = [f"{c:+.6g}*e{_blade_label(b)}" for b, c in enumerate(self.coeffs) if c != 0.0]
        return f"Multivector({' '.join(terms) or '0'})"

    @property
    def scalar_part(self) -> float:
        return float(self.coeffs[0])

    def grade(self, k: int) -> 'Multivector':
        return Multivector(self.signature, self.algebra.grade_part(self.coeffs, k))

    def grades(self, tol: float = 0.0) -> set:
        present = np.abs(self.coeffs) > tol
        return {int(g) for g in self.algebra.grades[present]}

    def is_paravector(self, tol: float = 0.0) -> bool:
        return bool(self.algebra.is_paravector(self.coeffs, tol))

    def conjugate(self) -> 'Multivector':
        return clifford_conjugate(self)

    def reverse(self) -> 'Multivector':
        return reversion(self)

    def involute(self) -> 'Multivector':
        return Multivector(self.signature, self.algebra.involute(self.coeffs))

    def norm(self) -> float:
        return norm(self)

    def inverse(self) -> 'Multivector':
        return paravector_inverse(self)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        coeffs = self._coerce(other)
        return bool(np.max(np.abs(self.coeffs - coeffs)) <= atol)


def _blade_label(b: int) -> str:
    return ''.join(str(i + 1) for i in range(MAX_GENERATORS) if b >> i & 1) or '0'


def _check_same_signature(a: Multivector, b: Multivector):
    if a.signature != b.signature:
        raise ServiceException(
            message=f"Signature mismatch: {a.signature} vs {b.signature}",
            code='signature_mismatch',
        )


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    """Geometric product ab; blade products use swap counting with e_i^2 = -1."""
    _check_same_signature(a, b)
    return Multivector(a.signature, a.algebra.product(a.coeffs, b.coeffs))


def clifford_conjugate(a: Multivector) -> Multivector:
    """Anti-automorphism with conj(e_j) = -e_j: grade k scaled by (-1)^{k(k+1)/2}."""
    return Multivector(a.signature, a.algebra.conjugate(a.coeffs))


def reversion(a: Multivector) -> Multivector:
    """Order reversal of blades: grade k scaled by (-1)^{k(k-1)/2}."""
    return Multivector(a.signature, a.algebra.reverse(a.coeffs))


def norm(a: Multivector) -> float:
    return float(a.algebra.norm(a.coeffs))


def paravector_inverse(x: Multivector, tol: float = 1e-14) -> Multivector:
    """
    Inverse conj(x)/|x|^2 of a nonzero paravector.

    Raises:
        ServiceException: If x has components of grade >= 2 or vanishes
    """
    if not x.is_paravector(tol=tol * max(1.0, norm(x))):
        raise ServiceException(
            message=f"Inverse only defined here for paravectors, got grades {sorted(x.grades())}",
            code='not_paravector',
        )
    size = norm(x)
    if size == 0.0:
        raise ServiceException(message="Zero paravector has no inverse", code='zero_paravector')
    return Multivector(x.signature, x.algebra.conjugate(x.coeffs) / size ** 2)


@dataclass(frozen=True, eq=False)
class SplitPoint:
    """
    Point x = x_p + x_q of R^{p+q+1}.

    x_p holds the coordinates x_0..x_p, x_q the coordinates x_{p+1}..x_{p+q};
    r = |x_q| and omega = x_q / r (None when r = 0) are computed once.
    """

    signature: AlgebraSignature
    x_p: np.ndarray
    x_q: np.ndarray
    r: float = field(init=False)
    omega: Optional[np.ndarray] = field(init=False)

    def __post_init__(self):
        x_p = np.array(self.x_p, dtype=float).reshape(-1)
        x_q = np.array(self.x_q, dtype=float).reshape(-1)
        if x_p.shape != (self.signature.p + 1,) or x_q.shape != (self.signature.q,):
            raise ServiceException(
                message=f"SplitPoint needs {self.signature.p + 1} + {self.signature.q} coordinates",
                code='invalid_point',
            )
        if not (np.all(np.isfinite(x_p)) and np.all(np.isfinite(x_q))):
            raise ServiceException(message="SplitPoint coordinates must be finite", code='invalid_point')
        x_p.setflags(write=False)
        x_q.setflags(write=False)
        r = float(np.linalg.norm(x_q))
        omega = None
        if r > 0.0:
            omega = x_q / r
            omega.setflags(write=False)
        object.__setattr__(self, 'x_p', x_p)
        object.__setattr__(self, 'x_q', x_q)
        object.__setattr__(self, 'r', r)
        object.__setattr__(self, 'omega', omega)

    @classmethod
    def from_coordinates(cls, signature: AlgebraSignature, coords: Iterable[float]) -> 'SplitPoint':
        coords = np.asarray(list(coords), dtype=float)
        return cls(signature, coords[:signature.p + 1], coords[signature.p + 1:])

    @classmethod
    def from_slice(cls, signature: AlgebraSignature, x_p: Sequence[float], r: float, direction: Sequence[float]) -> 'SplitPoint':
        """Point x_p + r*direction for a unit direction in R^q."""
        direction = np.asarray(direction, dtype=float)
        length = np.linalg.norm(direction)
        if not np.isclose(length, 1.0, atol=1e-12):
            raise ServiceException(message=f"Slice direction must be a unit vector (|w|={length})", code='invalid_point')
        return cls(signature, x_p, r * direction)

    @property
    def coordinates(self) -> np.ndarray:
        return np.concatenate([self.x_p, self.x_q])

    @property
    def stem(self) -> np.ndarray:
        """Stem coordinates (x_p, r) in R^{p+2}."""
        return np.append(self.x_p, self.r)

    def on_slice(self, direction: Sequence[float]) -> 'SplitPoint':
        """The point x_p + r*direction sharing this point's orbit [x]."""
        return SplitPoint(self.signature, self.x_p, self.r * np.asarray(direction, dtype=float))


def embed_point(pt: SplitPoint) -> Multivector:
    """Paravector x_0 + sum_{i>=1} x_i e_i."""
    algebra = CliffordAlgebra.for_signature(pt.signature)
    return Multivector(pt.signature, algebra.embed(pt.coordinates))


def embed_direction(signature: AlgebraSignature, direction: Sequence[float]) -> Multivector:
    """Grade-1 element omega = sum omega_j e_{p+j}."""
    algebra = CliffordAlgebra.for_signature(signature)
    return Multivector(signature, algebra.embed_sphere(np.asarray(direction, dtype=float)))
