"""Ampleness of the nondegeneracy relation for divergence free frames.

Data: a skew bilinear map S: R^3 x R^3 -> R^3 and a linear map
L: R^3 -> End(R^3), written in components as

    S(u, v) = sum_{i<j} (u_i v_j - u_j v_i) S_ij,    L(u) v = sum_{i,j} u_i v_j L_ij.

The map tau(u, v) = S(u, v) + L(u) v - L(v) u is skew and bilinear, so it is
onto R^3 exactly when the three vectors tau(e_2, e_3), tau(e_3, e_1),
tau(e_1, e_2) are linearly independent.

Arrays use 0-based indices: ``S[0], S[1], S[2]`` hold S_23, S_31, S_12 and
``L[i, j]`` holds L_{i+1, j+1}.  The plane E is {x_1 = 0}, so the rows
``L[1]`` and ``L[2]`` are the constrained entries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AmpleData",
    "EmptyIntersection",
    "tau",
    "tau_vectors",
    "is_nondegenerate",
    "nondegenerate_oracle",
    "convex_decompose",
    "Decomposition",
    "normalize_plane",
    "random_instance",
]

_PAIRS = ((1, 2), (2, 0), (0, 1))


class EmptyIntersection(ValueError):
    """S_23 + L_23 - L_32 = 0: no L with the prescribed restriction is nondegenerate."""


@dataclass(frozen=True)
class AmpleData:
    S: np.ndarray  # (3, 3): rows S_23, S_31, S_12
    L: np.ndarray  # (3, 3, 3): L[i, j] = L_{i+1, j+1}

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        L = np.array(self.L, dtype=float)
        if S.shape != (3, 3) or L.shape != (3, 3, 3):
            raise ValueError("S must have shape (3, 3) and L shape (3, 3, 3)")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "L", L)

    def S_ij(self, i: int, j: int) -> np.ndarray:
        """S_{ij} for 0-based i != j, with S_ji = -S_ij."""
        for r, (a, b) in enumerate(_PAIRS):
            if (i, j) == (a, b):
                return self.S[r]
            if (i, j) == (b, a):
                return -self.S[r]
        raise ValueError("S_ii is not defined")

    def S_tensor(self) -> np.ndarray:
        """T[:, i, j] = S_ij, skew in (i, j)."""
        T = np.zeros((3, 3, 3))
        for i in range(3):
            for j in range(3):
                if i != j:
                    T[:, i, j] = self.S_ij(i, j)
        return T

    def with_L(self, L) -> "AmpleData":
        return AmpleData(self.S, L)

    def same_restriction(self, other: "AmpleData", tol: float = 0.0) -> bool:
        """True if both L agree on E = {x_1 = 0} (rows i = 2, 3)."""
        return bool(np.max(np.abs(self.L[1:] - other.L[1:])) <= tol)


def tau(d: AmpleData, u, v) -> np.ndarray:
    """S(u, v) + L(u) v - L(v) u for batches of vectors (..., 3)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    S = np.einsum("aij,...i,...j->...a", d.S_tensor(), u, v)
    Luv = np.einsum("ija,...i,...j->...a", d.L, u, v)
    Lvu = np.einsum("ija,...i,...j->...a", d.L, v, u)
    return S + Luv - Lvu


def tau_vectors(d: AmpleData) -> np.ndarray:
    """Rows S_23 + L_23 - L_32, S_31 + L_31 - L_13, S_12 + L_12 - L_21."""
    return np.stack([d.S[r] + d.L[i, j] - d.L[j, i] for r, (i, j) in enumerate(_PAIRS)])


def _det_sign(rows, tol) -> int:
    det = float(np.linalg.det(rows))
    scale = float(np.prod(np.linalg.norm(rows, axis=1)))
    if scale == 0.0 or abs(det) <= tol * scale:
        return 0
    return 1 if det > 0 else -1


def is_nondegenerate(d: AmpleData, tol: float = 1e-12) -> int:
    """Sign of det(tau_23, tau_31, tau_12): +1, -1, or 0 when L is not in R."""
    return _det_sign(tau_vectors(d), tol)


def nondegenerate_oracle(d: AmpleData, samples: int = 32, seed: int = 0, tol: float = 1e-10) -> bool:
    """Brute force: do the values tau(u, v) at random pairs span R^3?"""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, 3))
    v = rng.standard_normal((samples, 3))
    vals = tau(d, u, v)
    sv = np.linalg.svd(vals, compute_uv=False)
    return bool(sv[-1] > tol * max(sv[0], 1e-300))


@dataclass(frozen=True)
class Decomposition:
    L1: AmpleData
    L2: AmpleData
    t: float
    x: np.ndarray
    y: np.ndarray
    dets: tuple

    def midpoint_error(self, d: AmpleData) -> float:
        return float(np.max(np.abs(0.5 * (self.L1.L + self.L2.L) - d.L)))


def _complete(a: np.ndarray, sign: int):
    """x, y with (a/|a|, x, y) orthonormal and det(a, x, y) of the given sign."""
    e = a / np.linalg.norm(a)
    k = int(np.argmin(np.abs(e)))
    x = np.eye(3)[k] - e[k] * e
    x /= np.linalg.norm(x)
    y = np.cross(e, x)
    return (x, y) if sign > 0 else (y, x)


def convex_decompose(
    d: AmpleData, target: int = 1, margin: float = 1.0, t0: float = 1.0, max_doublings: int = 200
) -> Decomposition:
    """Write L as the midpoint of L', L'' with the same restriction to E and
    det of the requested sign.

    L'_12 = L_12 + t y, L'_13 = L_13 - t x and L''_12 = L_12 - t y,
    L''_13 = L_13 + t x.  Then the determinants are
    det(a, b +- t x, c +- t y) with a, b, c the tau vectors of L, a quadratic
    in t with leading coefficient det(a, x, y).  Starting at t0, t doubles
    until both determinants carry the target sign with modulus >= margin and
    t is past the vertex of both quadratics, so larger t keeps membership.
    """
    if target not in (1, -1):
        raise ValueError("target sign must be +1 or -1")
    a, b, c = tau_vectors(d)
    if np.linalg.norm(a) == 0.0 or np.linalg.norm(a) <= 1e-14 * max(1.0, np.abs(d.S).max(), np.abs(d.L).max()):
        raise EmptyIntersection("S_23 + L_23 - L_32 = 0, so no L with this restriction is nondegenerate")
    x, y = _complete(a, target)
    d2 = np.linalg.det(np.stack([a, x, y]))
    d1 = np.linalg.det(np.stack([a, x, c])) + np.linalg.det(np.stack([a, b, y]))
    vertex = abs(d1) / (2 * abs(d2))
    t = t0
    for _ in range(max_doublings):
        dp = np.linalg.det(np.stack([a, b + t * x, c + t * y]))
        dm = np.linalg.det(np.stack([a, b - t * x, c - t * y]))
        if target * dp >= margin and target * dm >= margin and t >= vertex:
            break
        t *= 2
    else:
        raise RuntimeError("no admissible t found")
    L1, L2 = d.L.copy(), d.L.copy()
    L1[0, 1] += t * y
    L1[0, 2] -= t * x
    L2[0, 1] -= t * y
    L2[0, 2] += t * x
    return Decomposition(d.with_L(L1), d.with_L(L2), float(t), x, y, (float(dp), float(dm)))


def _rotation_to_e1(normal) -> np.ndarray:
    """Q in SO(3) with Q n = e_1 for the unit normal n."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    x, y = _complete(n, 1)
    return np.stack([n, x, y])


def normalize_plane(normal, S_tensor, L_tensor):
    """Change basis so that the plane normal to ``normal`` becomes {x_1 = 0}.

    ``S_tensor[a, i, j]`` and ``L_tensor[i, j, a]`` are the component tensors.
    Returns (AmpleData, Q) with Q in SO(3); the sign of the determinant is
    unchanged because Q preserves orientation.
    """
    Q = _rotation_to_e1(normal)
    S2 = np.einsum("ab,bkl,ik,jl->aij", Q, np.asarray(S_tensor, dtype=float), Q, Q)
    L2 = np.einsum("ab,klb,ik,jl->ija", Q, np.asarray(L_tensor, dtype=float), Q, Q)
    S_rows = np.stack([S2[:, i, j] for i, j in _PAIRS])
    return AmpleData(S_rows, L2), Q


def random_instance(rng, scale: float = 1.0) -> AmpleData:
    return AmpleData(scale * rng.standard_normal((3, 3)), scale * rng.standard_normal((3, 3, 3)))
