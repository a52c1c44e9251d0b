"""Band-limited maps M -> H^n stored as quaternion coefficients over a named basis.

Bases per manifold:

* ``Torus3`` -- real Fourier modes: ("c", k) = cos(2 pi k.y), ("s", k) = sin(2 pi k.y)
  with k in a half lattice, plus the constant ("c", (0, 0, 0)).
* ``Sphere3`` -- monomials y0^a0 y1^a1 y2^a2 y3^a3 with a0 <= 1.  Using
  y0^2 = 1 - y1^2 - y2^2 - y3^2 these restrict to a basis of the polynomials
  of degree <= n on S^3, so coefficients are unique.
* ``ProductS1S2`` -- (m, kind, l, mu): Fourier mode cos(m theta) or sin(m theta)
  (normalised on the circle) times a real spherical harmonic Y_l^mu.

Coefficients have shape (nbasis, n, 4).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .frames import PRODUCT_S1S2, SPHERE3, TORUS3, FrameSpec, check_point, _left_mats
from .harmonics import coordinate_multipliers, real_sh, rotation_generators, sh_labels
from .quaternion import J_MATRICES
from .quadrature import QuadratureRule

__all__ = [
    "FieldExpansion",
    "TruncationError",
    "torus_basis",
    "sphere3_basis",
    "s1s2_basis",
    "random_field",
    "identity_field_s3",
    "constant_field",
    "fueter_values",
    "apply_fueter",
    "field_mean",
    "project_mean_zero",
]


class TruncationError(ValueError):
    """The requested operation leaves the supported truncation."""


def half_lattice(K: int):
    """Nonzero k in Z^3 with |k|_inf <= K, one from each pair {k, -k}."""
    out = []
    for k in product(range(-K, K + 1), repeat=3):
        if k > (0, 0, 0):
            out.append(k)
    return out


def torus_basis(K: int):
    basis = [("c", (0, 0, 0))]
    for k in half_lattice(K):
        basis += [("c", k), ("s", k)]
    return basis


def sphere3_basis(degree: int):
    basis = []
    for d in range(degree + 1):
        for a0 in (0, 1):
            rest = d - a0
            if rest < 0:
                continue
            for a1 in range(rest, -1, -1):
                for a2 in range(rest - a1, -1, -1):
                    basis.append((a0, a1, a2, rest - a1 - a2))
    return basis


def s1s2_basis(L: int, M: int):
    basis = []
    for m in range(M + 1):
        kinds = ("c",) if m == 0 else ("c", "s")
        for kind in kinds:
            for l, mu in sh_labels(L):
                basis.append((m, kind, l, mu))
    return basis


def _reduce_sphere3(poly: dict) -> dict:
    """Rewrite y0^a0 with a0 >= 2 using y0^2 = 1 - y1^2 - y2^2 - y3^2."""
    out: dict = {}
    stack = list(poly.items())
    while stack:
        e, c = stack.pop()
        if e[0] < 2:
            out[e] = out.get(e, 0) + c
            continue
        base = (e[0] - 2,) + e[1:]
        stack.append((base, c))
        for a in (1, 2, 3):
            e2 = list(base)
            e2[a] += 2
            stack.append((tuple(e2), -c))
    return out


@dataclass(frozen=True)
class FieldExpansion:
    manifold: str
    basis: tuple
    coeffs: np.ndarray
    truncation: tuple

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 2:
            c = c[:, None, :]
        if c.shape[0] != len(self.basis) or c.shape[-1] != 4:
            raise ValueError("coefficients must have shape (nbasis, n, 4)")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "basis", tuple(self.basis))

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    def with_coeffs(self, coeffs) -> "FieldExpansion":
        return replace(self, coeffs=np.asarray(coeffs, dtype=float))

    def __add__(self, other):
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.with_coeffs(self.coeffs - other.coeffs)

    def scale(self, a: float):
        return self.with_coeffs(a * self.coeffs)

    def left_multiply(self, mat) -> "FieldExpansion":
        """Apply a 4x4 real matrix to every quaternion coefficient (e.g. J_a)."""
        return self.with_coeffs(self.coeffs @ np.asarray(mat).T)

    # ------------------------------------------------------------------ values

    def design(self, pts) -> np.ndarray:
        """Basis functions at the points, shape (npts, nbasis)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.manifold == TORUS3:
            k = np.array([b[1] for b in self.basis], dtype=float)
            ph = 2 * np.pi * pts @ k.T
            is_cos = np.array([b[0] == "c" for b in self.basis])
            return np.where(is_cos, np.cos(ph), np.sin(ph))
        if self.manifold == SPHERE3:
            e = np.array(self.basis)
            return np.prod(pts[:, None, :] ** e[None, :, :], axis=-1)
        L, M = self.truncation
        Y = real_sh(L, pts[:, 1:])
        th = pts[:, 0]
        cols = []
        index = {lm: a for a, lm in enumerate(sh_labels(L))}
        for m, kind, l, mu in self.basis:
            if m == 0:
                t = np.full_like(th, 1 / np.sqrt(2 * np.pi))
            elif kind == "c":
                t = np.cos(m * th) / np.sqrt(np.pi)
            else:
                t = np.sin(m * th) / np.sqrt(np.pi)
            cols.append(t * Y[:, index[(l, mu)]])
        return np.stack(cols, axis=1)

    def evaluate(self, pts) -> np.ndarray:
        """Values at the points, shape (npts, n, 4)."""
        return np.einsum("pb,bnq->pnq", self.design(pts), self.coeffs)

    @classmethod
    def from_samples(cls, template: "FieldExpansion", rule: QuadratureRule, values):
        """Discrete transform: fit coefficients to samples at the rule's nodes."""
        D = template.design(rule.nodes)
        vals = np.asarray(values, dtype=float).reshape(len(rule), -1)
        sw = np.sqrt(rule.weights)[:, None]
        coef, *_ = np.linalg.lstsq(D * sw, vals * sw, rcond=None)
        return template.with_coeffs(coef.reshape(len(template.basis), -1, 4))

    # ------------------------------------------------------------- derivatives

    def derivative(self, f: FrameSpec, i: int) -> "FieldExpansion":
        """Expansion of the directional derivative along v_i (T^3 and S^3 only)."""
        _check_frame(f, self)
        if self.manifold == TORUS3:
            return self._torus_derivative(f.U[:, i])
        if self.manifold == SPHERE3:
            return self._linear_derivative(_left_mats(f.U)[i])
        raise TruncationError("directional derivatives on S1xS2 leave the basis; use derivative_values")

    def derivative_along(self, vec) -> "FieldExpansion":
        """Derivative along the constant field vec (T^3) or the field y -> q y (S^3, vec = Im q)."""
        if self.manifold == TORUS3:
            return self._torus_derivative(np.asarray(vec, dtype=float))
        if self.manifold == SPHERE3:
            q = np.concatenate([[0.0], np.asarray(vec, dtype=float)])
            from .quaternion import left_matrix

            return self._linear_derivative(left_matrix(q))
        raise TruncationError("not available on S1xS2")

    def _torus_derivative(self, v) -> "FieldExpansion":
        index = {b: a for a, b in enumerate(self.basis)}
        out = np.zeros_like(self.coeffs)
        for a, (kind, k) in enumerate(self.basis):
            if k == (0, 0, 0):
                continue
            rate = 2 * np.pi * float(np.dot(k, v))
            if kind == "c":
                out[index[("s", k)]] -= rate * self.coeffs[a]
            else:
                out[index[("c", k)]] += rate * self.coeffs[a]
        return self.with_coeffs(out)

    def _linear_derivative(self, A) -> "FieldExpansion":
        # d/dt p(y + t A y) = sum_a (dp/dy_a) (A y)_a
        poly: dict = {}
        for e, c in zip(self.basis, self.coeffs):
            for a in range(4):
                if e[a] == 0:
                    continue
                for b in range(4):
                    if A[a, b] == 0:
                        continue
                    e2 = list(e)
                    e2[a] -= 1
                    e2[b] += 1
                    key = tuple(e2)
                    poly[key] = poly.get(key, 0) + e[a] * A[a, b] * c
        poly = _reduce_sphere3(poly)
        index = {b: a for a, b in enumerate(self.basis)}
        out = np.zeros_like(self.coeffs)
        for e, c in poly.items():
            if e not in index:
                raise TruncationError(f"monomial {e} outside the basis")
            out[index[e]] += c
        return self.with_coeffs(out)

    def derivative_values(self, f: FrameSpec, i: int, pts) -> np.ndarray:
        """Pointwise values of the derivative along v_i, shape (npts, n, 4)."""
        _check_frame(f, self)
        pts = check_point(f, np.atleast_2d(pts))
        if self.manifold != PRODUCT_S1S2:
            return self.derivative(f, i).evaluate(pts)
        # v_i = y_i d/dtheta + R_i
        dtheta = self.theta_derivative().evaluate(pts)
        rot = self.rotation_derivative(i).evaluate(pts)
        return pts[:, 1 + i, None, None] * dtheta + rot

    def theta_derivative(self) -> "FieldExpansion":
        if self.manifold != PRODUCT_S1S2:
            raise TruncationError("theta derivative only on S1xS2")
        index = {b: a for a, b in enumerate(self.basis)}
        out = np.zeros_like(self.coeffs)
        for a, (m, kind, l, mu) in enumerate(self.basis):
            if m == 0:
                continue
            if kind == "c":
                out[index[(m, "s", l, mu)]] -= m * self.coeffs[a]
            else:
                out[index[(m, "c", l, mu)]] += m * self.coeffs[a]
        return self.with_coeffs(out)

    def rotation_derivative(self, i: int) -> "FieldExpansion":
        """Derivative along the rotation field e_i x y of S^2 (preserves l)."""
        L, _ = self.truncation
        R = rotation_generators(L)[i]
        nsh = (L + 1) ** 2
        c = self.coeffs.reshape(-1, nsh, self.n, 4)
        return self.with_coeffs(np.einsum("pq,bqnr->bpnr", R, c).reshape(self.coeffs.shape))

    def multiply_coordinate_projected(self, i: int) -> "FieldExpansion":
        """Galerkin projection of y_i * g onto the same truncation."""
        L, _ = self.truncation
        Y = coordinate_multipliers(L)[i]
        nsh = (L + 1) ** 2
        c = self.coeffs.reshape(-1, nsh, self.n, 4)
        return self.with_coeffs(np.einsum("pq,bqnr->bpnr", Y, c).reshape(self.coeffs.shape))


def _check_frame(f: FrameSpec, g: FieldExpansion):
    if f.manifold != g.manifold:
        raise ValueError(f"frame on {f.manifold} cannot act on a field over {g.manifold}")


def _basis_for(manifold: str, truncation):
    if manifold == TORUS3:
        return torus_basis(*truncation)
    if manifold == SPHERE3:
        return sphere3_basis(*truncation)
    return s1s2_basis(*truncation)


def constant_field(manifold: str, truncation, q, n: int = 1) -> FieldExpansion:
    basis = _basis_for(manifold, truncation)
    coeffs = np.zeros((len(basis), n, 4))
    norm = 1.0
    if manifold == PRODUCT_S1S2:
        # constant basis function is 1 / sqrt(2 pi) * 1 / sqrt(4 pi)
        norm = np.sqrt(8 * np.pi**2)
    coeffs[0] = np.asarray(q, dtype=float).reshape(n, 4) * norm
    return FieldExpansion(manifold, basis, coeffs, tuple(truncation))


def identity_field_s3(degree: int = 1) -> FieldExpansion:
    """The inclusion S^3 -> H, g(y) = y."""
    basis = sphere3_basis(degree)
    coeffs = np.zeros((len(basis), 1, 4))
    for a in range(4):
        e = [0, 0, 0, 0]
        e[a] = 1
        coeffs[basis.index(tuple(e)), 0, a] = 1.0
    return FieldExpansion(SPHERE3, basis, coeffs, (degree,))


def random_field(manifold: str, truncation, rng, n: int = 1, mean_zero: bool = False) -> FieldExpansion:
    """Random band-limited field with standard normal coefficients."""
    truncation = tuple(truncation)
    basis = _basis_for(manifold, truncation)
    coeffs = rng.standard_normal((len(basis), n, 4))
    if mean_zero:
        if manifold == SPHERE3:
            raise ValueError("use project_mean_zero for S^3 polynomial fields")
        coeffs[0] = 0.0
    return FieldExpansion(manifold, basis, coeffs, truncation)


def fueter_values(f: FrameSpec, g: FieldExpansion, pts) -> np.ndarray:
    """Pointwise values of sum_a J_a d_{v_a} g."""
    out = 0.0
    for a in range(3):
        out = out + g.derivative_values(f, a, pts) @ J_MATRICES[a].T
    return out


def apply_fueter(f: FrameSpec, g: FieldExpansion, strict: bool = False) -> FieldExpansion:
    """Coefficients of the Fueter operator applied to g.

    Exact on T^3 and S^3.  On S^1 x S^2 the multiplication by y_i raises l by
    one, so the result is the Galerkin projection onto the input truncation;
    with ``strict=True`` a nonzero top-degree component raises TruncationError.
    """
    _check_frame(f, g)
    if g.manifold != PRODUCT_S1S2:
        out = None
        for a in range(3):
            term = g.derivative(f, a).left_multiply(J_MATRICES[a])
            out = term if out is None else out + term
        return out
    if strict:
        L, _ = g.truncation
        top = [b for b, lab in enumerate(g.basis) if lab[2] == L]
        if np.any(np.abs(g.coeffs[top]) > 0):
            raise TruncationError("y_i coupling pushes degree L components beyond L_max")
    dth = g.theta_derivative()
    out = None
    for a in range(3):
        term = dth.multiply_coordinate_projected(a) + g.rotation_derivative(a)
        term = term.left_multiply(J_MATRICES[a])
        out = term if out is None else out + term
    return out


def field_mean(g: FieldExpansion) -> np.ndarray:
    """Average of g over the manifold, shape (n, 4)."""
    from .quadrature import rule_for, s1s2_rule

    if g.manifold == PRODUCT_S1S2:
        rule = s1s2_rule(g.truncation[1] + 1, g.truncation[0] + 1)
    else:
        rule = rule_for(g.manifold, g.truncation[0] + 1)
    vol = rule.weights.sum()
    return rule.integrate(g.evaluate(rule.nodes)) / vol


def project_mean_zero(g: FieldExpansion) -> FieldExpansion:
    """Subtract the average so that the field has mean value zero."""
    m = field_mean(g)
    return g - constant_field(g.manifold, g.truncation, m, g.n)
