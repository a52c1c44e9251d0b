"""Quaternion arithmetic and the hyperkähler structure on H = R^4.

Components are stored in (x0, x1, x2, x3) order for x = x0 + i x1 + j x2 + k x3.
The vectorised helpers operate on arrays whose last axis has length 4; the
:class:`Quaternion` value type wraps a single element for readable call sites.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Quaternion",
    "qmul",
    "qmul_arr",
    "left_matrix",
    "right_matrix",
    "J_MATRICES",
    "I_MATRICES",
    "apply_J",
    "apply_I",
    "omega",
    "omega_components",
    "UNITS",
]


def qmul_arr(a, b):
    """Hamilton product of broadcastable arrays of shape (..., 4)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2, a3 = np.moveaxis(a, -1, 0)
    b0, b1, b2, b3 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


def left_matrix(q) -> np.ndarray:
    """4x4 real matrix of x -> q x."""
    eye = np.eye(4)
    return qmul_arr(np.asarray(q, dtype=float)[None, :], eye).T


def right_matrix(q) -> np.ndarray:
    """4x4 real matrix of x -> x q."""
    eye = np.eye(4)
    return qmul_arr(eye, np.asarray(q, dtype=float)[None, :]).T


UNITS = np.eye(4)

# J_a x = e_a x and I_a x = -x e_a, a = 1, 2, 3 (stored 0-based).
J_MATRICES = np.stack([left_matrix(UNITS[a]) for a in (1, 2, 3)])
I_MATRICES = np.stack([-right_matrix(UNITS[a]) for a in (1, 2, 3)])


def _axis(i: int) -> int:
    if i not in (1, 2, 3):
        raise ValueError(f"axis index must be 1, 2 or 3, got {i!r}")
    return i - 1


@dataclass(frozen=True)
class Quaternion:
    x0: float = 0.0
    x1: float = 0.0
    x2: float = 0.0
    x3: float = 0.0

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        a = np.asarray(a, dtype=float).reshape(4)
        return cls(*(float(c) for c in a))

    def to_array(self) -> np.ndarray:
        return np.array([self.x0, self.x1, self.x2, self.x3])

    def norm2(self) -> float:
        return self.x0**2 + self.x1**2 + self.x2**2 + self.x3**2

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def conj(self) -> "Quaternion":
        return Quaternion(self.x0, -self.x1, -self.x2, -self.x3)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return qmul(self, other)
        return Quaternion.from_array(self.to_array() * float(other))

    __rmul__ = __mul__

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion.from_array(self.to_array() + other.to_array())

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion.from_array(self.to_array() - other.to_array())

    def __neg__(self) -> "Quaternion":
        return Quaternion.from_array(-self.to_array())

    def isclose(self, other: "Quaternion", atol: float = 1e-14) -> bool:
        return bool(np.allclose(self.to_array(), other.to_array(), rtol=0.0, atol=atol))


def qmul(a: Quaternion, b: Quaternion) -> Quaternion:
    return Quaternion.from_array(qmul_arr(a.to_array(), b.to_array()))


def apply_J(i: int, x):
    """Left multiplication by the i-th imaginary unit (J_1 x = i x, ...)."""
    m = J_MATRICES[_axis(i)]
    if isinstance(x, Quaternion):
        return Quaternion.from_array(m @ x.to_array())
    return np.asarray(x, dtype=float) @ m.T


def apply_I(i: int, x):
    """Negated right multiplication by the i-th unit (I_1 x = -x i, ...)."""
    m = I_MATRICES[_axis(i)]
    if isinstance(x, Quaternion):
        return Quaternion.from_array(m @ x.to_array())
    return np.asarray(x, dtype=float) @ m.T


def omega(i: int, u, v):
    """Symplectic pairing omega_i(u, v) = <J_i u, v>.

    Accepts Quaternions or arrays of shape (..., 4); arrays are reduced over
    the last axis so ℍ^n-valued data can be passed flattened as (..., n, 4).
    """
    if isinstance(u, Quaternion):
        u = u.to_array()
    if isinstance(v, Quaternion):
        v = v.to_array()
    Ju = np.asarray(u, dtype=float) @ J_MATRICES[_axis(i)].T
    return np.sum(Ju * np.asarray(v, dtype=float), axis=-1)


def omega_components(i: int, u, v):
    """omega_i = dx0^dx_i + dx_j^dx_k written out in components (i, j, k cyclic)."""
    a = _axis(i) + 1
    b = a % 3 + 1
    c = b % 3 + 1
    if isinstance(u, Quaternion):
        u = u.to_array()
    if isinstance(v, Quaternion):
        v = v.to_array()
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return (
        u[..., 0] * v[..., a] - u[..., a] * v[..., 0]
        + u[..., b] * v[..., c] - u[..., c] * v[..., b]
    )
