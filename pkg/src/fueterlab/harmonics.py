"""Real spherical harmonics on S^2 and the rotation generators acting on them.

Basis order: l = 0..L, and within each l the real harmonics indexed by
mu = -l..l (mu < 0 sine-type, mu > 0 cosine-type).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

__all__ = [
    "sh_labels",
    "real_sh",
    "rotation_generators",
    "coordinate_multipliers",
]


def sh_labels(L: int):
    return [(l, mu) for l in range(L + 1) for mu in range(-l, l + 1)]


def _to_real(l: int) -> np.ndarray:
    """Unitary T with Y_real = T @ Y_complex for one degree l (complex order m = -l..l)."""
    n = 2 * l + 1
    T = np.zeros((n, n), dtype=complex)
    r2 = np.sqrt(2.0)
    for mu in range(-l, l + 1):
        row = mu + l
        if mu == 0:
            T[row, l] = 1.0
        elif mu > 0:
            T[row, mu + l] = (-1) ** mu / r2
            T[row, -mu + l] = 1 / r2
        else:
            a = -mu
            T[row, a + l] = (-1) ** a / (1j * r2)
            T[row, -a + l] = -1 / (1j * r2)
    return T


def real_sh(L: int, pts) -> np.ndarray:
    """Orthonormal real harmonics at points of S^2, shape (npts, (L+1)^2)."""
    pts = np.asarray(pts, dtype=float)
    polar = np.arccos(np.clip(pts[:, 2], -1, 1))
    az = np.arctan2(pts[:, 1], pts[:, 0])
    cols = []
    for l in range(L + 1):
        Yc = np.stack([sph_harm_y(l, m, polar, az) for m in range(-l, l + 1)], axis=1)
        cols.append((Yc @ _to_real(l).T).real)
    return np.concatenate(cols, axis=1)


def _angular_momentum(l: int):
    """L_x, L_y, L_z on Y_l^m, complex order m = -l..l (Condon-Shortley)."""
    m = np.arange(-l, l + 1)
    n = len(m)
    Lp = np.zeros((n, n))
    for a in range(n - 1):
        Lp[a + 1, a] = np.sqrt(l * (l + 1) - m[a] * (m[a] + 1))
    Lx = 0.5 * (Lp + Lp.T)
    Ly = -0.5j * (Lp - Lp.T)
    Lz = np.diag(m).astype(complex)
    return Lx.astype(complex), Ly, Lz


@lru_cache(maxsize=None)
def rotation_generators(L: int) -> np.ndarray:
    """Matrices of R_a = (e_a x y) . grad in the real basis, shape (3, n, n).

    R_a = i L_a with L = -i y x grad. Entry [p, q] is the coefficient of basis
    function p in R_a applied to basis function q; the matrices are real and
    antisymmetric.
    """
    n = (L + 1) ** 2
    out = np.zeros((3, n, n))
    off = 0
    for l in range(L + 1):
        T = _to_real(l)
        d = 2 * l + 1
        for a, La in enumerate(_angular_momentum(l)):
            M = T.conj() @ (1j * La) @ T.T
            if np.max(np.abs(M.imag)) > 1e-12:
                raise AssertionError("rotation generator is not real in the real basis")
            out[a, off:off + d, off:off + d] = M.real
        off += d
    return out


@lru_cache(maxsize=None)
def coordinate_multipliers(L: int) -> np.ndarray:
    """Galerkin matrices of multiplication by y_1, y_2, y_3, shape (3, n, n).

    The integrands have degree <= 2L + 1, and the quadrature is exact to 2L + 2.
    """
    from .quadrature import sphere2_rule

    pts, w = sphere2_rule(2 * L + 2)
    Y = real_sh(L, pts)
    return np.stack([(Y * (w * pts[:, a])[:, None]).T @ Y for a in range(3)])
