"""Catalog of divergence free frames on T^3, S^3 and S^1 x S^2.

Points and tangent vectors live in a fixed ambient chart per manifold:

* ``Torus3``: y in [0, 1)^3, tangent vectors in R^3.
* ``Sphere3``: y in R^4 with |y| = 1 (identified with a unit quaternion),
  tangent vectors are ambient R^4 vectors orthogonal to y.
* ``ProductS1S2``: p = (theta, y1, y2, y3) with |y| = 1, tangent vectors are
  (d theta, dy) in R^4 with dy orthogonal to y.

Covectors use the same ambient coordinates and pair with vectors through the
Euclidean dot product.  All functions accept a single point of shape (d,) or a
stack of points of shape (..., d).

Lie brackets follow the convention L_[u,v] = -[L_u, L_v]; in ambient
coordinates this is [u, v] = Du.v - Dv.u, which gives [v_j, v_k] = 2 v_i for
the standard frame on S^3.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .quaternion import left_matrix

__all__ = [
    "TORUS3",
    "SPHERE3",
    "PRODUCT_S1S2",
    "FrameSpec",
    "FrameError",
    "standard_s3",
    "singular_s3",
    "product_s1s2",
    "torus3",
    "frame_vectors",
    "dual_coframe",
    "volume_density",
    "is_normal",
    "bracket_fields",
    "bracket_oracle",
    "divergence",
    "divergence_residual",
    "metric_eval",
    "spinc_lambda",
    "random_points",
    "check_point",
]

TORUS3 = "Torus3"
SPHERE3 = "Sphere3"
PRODUCT_S1S2 = "ProductS1S2"
MANIFOLDS = (TORUS3, SPHERE3, PRODUCT_S1S2)
AMBIENT_DIM = {TORUS3: 3, SPHERE3: 4, PRODUCT_S1S2: 4}


class FrameError(ValueError):
    """Invalid frame data or a point that does not lie on the frame's manifold."""


@dataclass(frozen=True)
class FrameSpec:
    manifold: str
    U: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if self.manifold not in MANIFOLDS:
            raise FrameError(f"unknown manifold {self.manifold!r}")
        U = np.array(self.U, dtype=float).reshape(3, 3)
        U.setflags(write=False)
        object.__setattr__(self, "U", U)
        if not np.linalg.det(U) > 0:
            raise FrameError("frame matrix must have positive determinant")
        if self.manifold == PRODUCT_S1S2 and not np.allclose(U, np.eye(3), atol=0.0):
            raise FrameError("ProductS1S2 supports only the catalog frame (U = identity)")

    def __eq__(self, other):
        return (
            isinstance(other, FrameSpec)
            and self.manifold == other.manifold
            and np.array_equal(self.U, other.U)
        )

    def __hash__(self):
        return hash((self.manifold, self.U.tobytes()))

    @property
    def ambient_dim(self) -> int:
        return AMBIENT_DIM[self.manifold]

    @property
    def volume(self) -> float:
        return {TORUS3: 1.0, SPHERE3: 2 * np.pi**2, PRODUCT_S1S2: 8 * np.pi**2}[self.manifold]

    def to_json(self) -> dict:
        return {"manifold": self.manifold, "U": [float(x) for x in self.U.ravel()]}

    @classmethod
    def from_json(cls, obj) -> "FrameSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or "manifold" not in obj:
            raise FrameError("frame JSON must be an object with a 'manifold' key")
        U = obj.get("U", [1, 0, 0, 0, 1, 0, 0, 0, 1])
        if len(U) != 9:
            raise FrameError("frame JSON 'U' must hold 9 reals (row-major)")
        return cls(obj["manifold"], np.asarray(U, dtype=float).reshape(3, 3))


def torus3(U=None) -> FrameSpec:
    return FrameSpec(TORUS3, np.eye(3) if U is None else U)


def standard_s3() -> FrameSpec:
    return FrameSpec(SPHERE3, np.eye(3))


def singular_s3() -> FrameSpec:
    """Normal singular frame v = (2^(2/3) iy, -2^(-1/3) jy, -2^(-1/3) ky)."""
    return FrameSpec(SPHERE3, np.diag([2 ** (2 / 3), -(2 ** (-1 / 3)), -(2 ** (-1 / 3))]))


def product_s1s2() -> FrameSpec:
    return FrameSpec(PRODUCT_S1S2, np.eye(3))


def _imag(U) -> np.ndarray:
    """Columns of U as pure imaginary quaternions, shape (3, 4)."""
    u = np.zeros((3, 4))
    u[:, 1:] = np.asarray(U).T
    return u


def _left_mats(U) -> np.ndarray:
    """4x4 matrices y -> u_i y for the columns u_i of U."""
    return np.stack([left_matrix(q) for q in _imag(U)])


def check_point(f: FrameSpec, p, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != f.ambient_dim:
        raise FrameError(
            f"point of dimension {p.shape[-1]} does not lie on {f.manifold}"
        )
    if f.manifold == SPHERE3:
        if np.any(np.abs(np.linalg.norm(p, axis=-1) - 1.0) > tol):
            raise FrameError("Sphere3 points must have unit norm")
    elif f.manifold == PRODUCT_S1S2:
        if np.any(np.abs(np.linalg.norm(p[..., 1:], axis=-1) - 1.0) > tol):
            raise FrameError("ProductS1S2 points need a unit vector y")
    return p


def random_points(manifold: str, n: int, rng) -> np.ndarray:
    if manifold == TORUS3:
        return rng.random((n, 3))
    if manifold == SPHERE3:
        y = rng.standard_normal((n, 4))
        return y / np.linalg.norm(y, axis=1, keepdims=True)
    if manifold == PRODUCT_S1S2:
        y = rng.standard_normal((n, 3))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        return np.concatenate([2 * np.pi * rng.random((n, 1)), y], axis=1)
    raise FrameError(f"unknown manifold {manifold!r}")


# ---------------------------------------------------------------------------
# ambient vector field extensions (also used by the oracles)


def _field(f: FrameSpec, i: int, p: np.ndarray) -> np.ndarray:
    """Ambient extension of v_i evaluated at p (shape (..., d))."""
    if f.manifold == TORUS3:
        return np.broadcast_to(f.U[:, i], p.shape).copy()
    if f.manifold == SPHERE3:
        return p @ _left_mats(f.U)[i].T
    y = p[..., 1:]
    out = np.empty_like(p)
    out[..., 0] = y[..., i]
    out[..., 1:] = np.cross(np.eye(3)[i], y)
    return out


def _flow(f: FrameSpec, i: int, t: float, p: np.ndarray) -> np.ndarray:
    """Exact time-t flow of v_i."""
    if f.manifold == TORUS3:
        return p + t * f.U[:, i]
    if f.manifold == SPHERE3:
        return p @ expm(t * _left_mats(f.U)[i]).T
    # y rotates about e_i and y_i is conserved, so theta advances linearly.
    axis = np.eye(3)[i]
    K = np.cross(axis[None, :], np.eye(3)).T  # K @ y = e_i x y
    out = np.empty_like(p)
    out[..., 0] = p[..., 0] + t * p[..., 1 + i]
    out[..., 1:] = p[..., 1:] @ expm(t * K).T
    return out


def frame_vectors(f: FrameSpec, p) -> np.ndarray:
    """The three frame vectors at p, shape (..., 3, d)."""
    p = check_point(f, p)
    return np.stack([_field(f, i, p) for i in range(3)], axis=-2)


def _tangent_projector(f: FrameSpec, p: np.ndarray) -> np.ndarray:
    d = f.ambient_dim
    P = np.broadcast_to(np.eye(d), p.shape[:-1] + (d, d)).copy()
    if f.manifold == SPHERE3:
        P -= p[..., :, None] * p[..., None, :]
    elif f.manifold == PRODUCT_S1S2:
        y = p[..., 1:]
        P[..., 1:, 1:] -= y[..., :, None] * y[..., None, :]
    return P


def dual_coframe(f: FrameSpec, p) -> np.ndarray:
    """Covectors alpha_i with alpha_i(v_j) = delta_ij, shape (..., 3, d).

    The covectors annihilate the normal direction of the embedding.
    """
    p = check_point(f, p)
    if f.manifold == TORUS3:
        return np.broadcast_to(np.linalg.inv(f.U), p.shape[:-1] + (3, 3)).copy()
    V = frame_vectors(f, p)  # rows are v_i
    return np.linalg.pinv(np.swapaxes(V, -1, -2))


def _dvol(f: FrameSpec, p: np.ndarray, a, b, c) -> np.ndarray:
    if f.manifold == TORUS3:
        return np.linalg.det(np.stack([a, b, c], axis=-1))
    if f.manifold == SPHERE3:
        # dvol = y0 dy1dy2dy3 - y1 dy0dy2dy3 - ... = det[y, a, b, c]
        return np.linalg.det(np.stack([p, a, b, c], axis=-1))
    # dtheta ^ dvol_S2 with dvol_S2(b, c) = det[y, b, c]
    y = p[..., 1:]

    def area(u, w):
        return np.linalg.det(np.stack([y, u[..., 1:], w[..., 1:]], axis=-1))

    return a[..., 0] * area(b, c) - b[..., 0] * area(a, c) + c[..., 0] * area(a, b)


def volume_density(f: FrameSpec, p) -> np.ndarray:
    """lambda(p) = dvol(v_1, v_2, v_3)(p)."""
    p = check_point(f, p)
    V = frame_vectors(f, p)
    return _dvol(f, p, V[..., 0, :], V[..., 1, :], V[..., 2, :])


def is_normal(f: FrameSpec, n: int = 200, seed: int = 0, tol: float = 1e-10) -> bool:
    pts = random_points(f.manifold, n, np.random.default_rng(seed))
    return bool(np.max(np.abs(volume_density(f, pts) - 1.0)) < tol)


def bracket_fields(f: FrameSpec, p) -> np.ndarray:
    """Analytic w_1 = [v_2, v_3], w_2 = [v_3, v_1], w_3 = [v_1, v_2], shape (..., 3, d)."""
    p = check_point(f, p)
    if f.manifold == TORUS3:
        return np.zeros(p.shape[:-1] + (3, 3))
    if f.manifold == SPHERE3:
        u = f.U.T  # rows u_i in Im H
        w = np.zeros((3, 3))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            w[:, i] = 2 * np.cross(u[j], u[k])
        return np.stack([p @ m.T for m in _left_mats(w)], axis=-2)
    y = p[..., 1:]
    out = np.empty(p.shape[:-1] + (3, 4))
    for i in range(3):
        out[..., i, 0] = 2 * y[..., i]
        out[..., i, 1:] = np.cross(np.eye(3)[i], y)
    return out


def _commutator(f: FrameSpec, a: int, b: int, p: np.ndarray, h: float) -> np.ndarray:
    """Flow commutator displacement divided by h^2 (first order in h).

    Following v_a, v_b, -v_a, -v_b moves p by -h^2 [v_a, v_b] here, since the
    bracket convention is the negative of the usual one.
    """
    q = _flow(f, a, h, p)
    q = _flow(f, b, h, q)
    q = _flow(f, a, -h, q)
    q = _flow(f, b, -h, q)
    return (p - q) / h**2


def bracket_oracle(f: FrameSpec, p, h: float = 1e-2) -> np.ndarray:
    """Richardson-extrapolated flow commutators approximating w_i.

    The loop phi^b_{-h} phi^a_{-h} phi^b_h phi^a_h moves p by -h^2 times the
    bracket, plus O(h^3); combining steps h and h/2 cancels the first-order
    error term.
    """
    if h <= 0:
        raise FrameError("step must be positive")
    p = check_point(f, p)
    out = []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        c1 = _commutator(f, j, k, p, h)
        c2 = _commutator(f, j, k, p, h / 2)
        out.append(2 * c2 - c1)
    w = np.stack(out, axis=-2)
    # drop the O(h^2) normal drift so results are tangent like bracket_fields
    P = _tangent_projector(f, p)
    return np.einsum("...ab,...ib->...ia", P, w)


def _jacobian(f: FrameSpec, i: int, p: np.ndarray, h: float = 1e-5) -> np.ndarray:
    d = f.ambient_dim
    J = np.empty(p.shape[:-1] + (d, d))
    for b in range(d):
        e = np.zeros(d)
        e[b] = h
        J[..., :, b] = (_field(f, i, p + e) - _field(f, i, p - e)) / (2 * h)
    return J


def divergence(f: FrameSpec, i: int, p) -> np.ndarray:
    """Divergence of v_i with respect to dvol_M, computed from ambient Jacobians."""
    p = check_point(f, p)
    J = _jacobian(f, i, p)
    P = _tangent_projector(f, p)
    return np.einsum("...ab,...ba->...", P, J)


def divergence_residual(f: FrameSpec, n: int = 400, seed: int = 0) -> float:
    """max_i max_p |div v_i| over a random test set (d iota(v_i) dvol = div(v_i) dvol)."""
    pts = random_points(f.manifold, n, np.random.default_rng(seed))
    return float(max(np.max(np.abs(divergence(f, i, pts))) for i in range(3)))


def metric_eval(f: FrameSpec, p, a, b) -> np.ndarray:
    """<a, b> = sum_i alpha_i(a) alpha_i(b)."""
    alpha = dual_coframe(f, p)
    aa = np.einsum("...id,...d->...i", alpha, np.asarray(a, dtype=float))
    bb = np.einsum("...id,...d->...i", alpha, np.asarray(b, dtype=float))
    return np.sum(aa * bb, axis=-1)


def spinc_lambda(f: FrameSpec, p) -> np.ndarray:
    """lambda = 1/4 sum_i alpha_i([v_j, v_k])."""
    alpha = dual_coframe(f, p)
    w = bracket_fields(f, p)
    return 0.25 * np.einsum("...id,...id->...", alpha, w)
