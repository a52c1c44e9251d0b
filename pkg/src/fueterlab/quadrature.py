"""Product quadrature rules on T^3, S^3, S^2 and S^1 x S^2.

Every rule is exact for polynomial (resp. trigonometric) integrands up to a
declared degree and its weights sum to the volume of the manifold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import PRODUCT_S1S2, SPHERE3, TORUS3

__all__ = [
    "QuadratureRule",
    "torus_rule",
    "sphere2_rule",
    "sphere3_rule",
    "s1s2_rule",
    "rule_for",
]


@dataclass(frozen=True)
class QuadratureRule:
    manifold: str
    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values) -> np.ndarray:
        """Integrate values sampled at the nodes (first axis) against the weights."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def __len__(self):
        return len(self.weights)


def _uniform_circle(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / n


def torus_rule(degree: int) -> QuadratureRule:
    """Tensor trapezoid rule, exact for trigonometric polynomials of degree <= degree."""
    n = degree + 1
    g = np.arange(n) / n
    Y = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    return QuadratureRule(TORUS3, Y, np.full(len(Y), 1.0 / len(Y)), degree)


def sphere2_rule(degree: int):
    """Gauss-Legendre in cos(polar) times uniform azimuth; returns (points, weights)."""
    n_gl = degree // 2 + 1
    n_az = degree + 1
    x, w = np.polynomial.legendre.leggauss(n_gl)
    phi = _uniform_circle(n_az)
    X, P = np.meshgrid(x, phi, indexing="ij")
    W = np.repeat(w[:, None], n_az, axis=1) * (2 * np.pi / n_az)
    s = np.sqrt(1 - X**2)
    pts = np.stack([s * np.cos(P), s * np.sin(P), X], axis=-1).reshape(-1, 3)
    return pts, W.ravel()


def sphere3_rule(degree: int) -> QuadratureRule:
    """Hopf-coordinate rule on S^3: y0 + i y1 = cos(eta) e^{i a}, y2 + i y3 = sin(eta) e^{i b}.

    With t = sin^2(eta) the volume element is dt da db / 2, and a degree-d
    polynomial becomes a polynomial of degree <= d/2 in t after the two
    azimuthal averages, so Gauss-Legendre in t with d//4 + 1 nodes is exact.
    """
    n_t = degree // 4 + 1
    n_az = degree + 1
    x, w = np.polynomial.legendre.leggauss(n_t)
    t = 0.5 * (x + 1)
    wt = 0.5 * w
    ang = _uniform_circle(n_az)
    T, A, B = np.meshgrid(t, ang, ang, indexing="ij")
    c, s = np.sqrt(1 - T), np.sqrt(T)
    Y = np.stack([c * np.cos(A), c * np.sin(A), s * np.cos(B), s * np.sin(B)], axis=-1)
    W = 0.5 * wt[:, None, None] * (2 * np.pi / n_az) ** 2 * np.ones_like(T)
    return QuadratureRule(SPHERE3, Y.reshape(-1, 4), W.ravel(), degree)


def s1s2_rule(degree_theta: int, degree_sphere: int) -> QuadratureRule:
    th = _uniform_circle(degree_theta + 1)
    pts, w = sphere2_rule(degree_sphere)
    Th = np.repeat(th, len(w))
    Pts = np.tile(pts, (len(th), 1))
    W = np.tile(w, len(th)) * (2 * np.pi / len(th))
    nodes = np.concatenate([Th[:, None], Pts], axis=1)
    return QuadratureRule(PRODUCT_S1S2, nodes, W, min(degree_theta, degree_sphere))


def rule_for(manifold: str, degree: int) -> QuadratureRule:
    if manifold == TORUS3:
        return torus_rule(degree)
    if manifold == SPHERE3:
        return sphere3_rule(degree)
    if manifold == PRODUCT_S1S2:
        return s1s2_rule(degree, degree)
    raise ValueError(f"unknown manifold {manifold!r}")
