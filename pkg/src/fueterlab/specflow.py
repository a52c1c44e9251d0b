"""Eigenvalue curves, crossing forms and spectral flow along paths of frames.

A path s -> U(s) of frame matrices on Torus3 or Sphere3 gives, for every block
label, a path of real symmetric matrices D(s).  The blocks depend linearly on
U, so the derivative of the block is the block built from dU/ds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .frames import SPHERE3, TORUS3, FrameSpec, bracket_fields
from .spectral import _s3_parts, _torus_parts, eigh_sorted
from .su2 import as_spin

__all__ = [
    "FramePath",
    "MatrixPath",
    "polynomial_path",
    "CrossingReport",
    "FlowResult",
    "NonRegularCrossing",
    "MatchingAmbiguity",
    "block_matrix",
    "block_weight",
    "eigencurves",
    "crossing_form",
    "find_crossings",
    "spectral_flow",
    "slope_vs_gamma",
    "s3_catalog_path",
    "linear_path",
    "perturbation_path",
    "constant_path",
    "default_labels",
]


class NonRegularCrossing(RuntimeError):
    """A crossing form is degenerate; perturb the path."""


class MatchingAmbiguity(RuntimeError):
    """Eigenvectors at adjacent samples overlap too little; refine the grid."""


def block_matrix(manifold: str, U, label) -> np.ndarray:
    """Block of the operator for an arbitrary 3x3 matrix U (no positivity check)."""
    if manifold == TORUS3:
        if tuple(label) == (0, 0, 0):
            return np.zeros((4, 4))
        return _torus_parts(U, label)[0]
    if manifold == SPHERE3:
        return _s3_parts(U, label)[0]
    raise ValueError("paths are supported on Torus3 and Sphere3")


def block_weight(manifold, label) -> Fraction:
    if manifold == SPHERE3:
        j = as_spin(label)
        return Fraction(1) if j == 0 else Fraction(int(2 * j) + 1, 2)
    return Fraction(1)


def _is_constant_block(manifold: str, label) -> bool:
    if manifold is None:
        return False
    if manifold == TORUS3:
        return tuple(label) == (0, 0, 0)
    return as_spin(label) == 0


def default_labels(manifold: str, cutoff=None, include_constants: bool = False):
    from .spectral import block_labels

    labels = block_labels(FrameSpec(manifold, np.eye(3)), cutoff)
    if not include_constants:
        labels = [lab for lab in labels if not _is_constant_block(manifold, lab)]
    return labels


@dataclass
class FramePath:
    manifold: str
    frame_at: Callable[[float], np.ndarray]
    s_range: tuple = (0.0, 1.0)
    derivative_at: Callable[[float], np.ndarray] | None = None
    h_s: float = 1e-5

    def U(self, s: float) -> np.ndarray:
        return np.asarray(self.frame_at(s), dtype=float)

    def frame(self, s: float) -> FrameSpec:
        return FrameSpec(self.manifold, self.U(s))

    def dU(self, s: float) -> np.ndarray:
        if self.derivative_at is not None:
            return np.asarray(self.derivative_at(s), dtype=float)
        h = self.h_s
        d1 = (self.U(s + h) - self.U(s - h)) / (2 * h)
        d2 = (self.U(s + h / 2) - self.U(s - h / 2)) / h
        return (4 * d2 - d1) / 3  # Richardson

    def D(self, s: float, label) -> np.ndarray:
        return block_matrix(self.manifold, self.U(s), label)

    def Ddot(self, s: float, label) -> np.ndarray:
        return block_matrix(self.manifold, self.dU(s), label)

    def check(self, grid) -> None:
        for s in grid:
            if not np.linalg.det(self.U(s)) > 0:
                raise ValueError(f"path leaves the positive frames at s={s}")

    def reversed(self) -> "FramePath":
        a, b = self.s_range
        fa = self.frame_at
        da = self.derivative_at
        return FramePath(
            self.manifold,
            lambda s: fa(a + b - s),
            (a, b),
            None if da is None else (lambda s: -np.asarray(da(a + b - s))),
            self.h_s,
        )

    def then(self, other: "FramePath") -> "FramePath":
        """Catenation: this path followed by ``other`` (shifted to start at this end)."""
        a, b = self.s_range
        c, d = other.s_range
        shift = b - c
        f1, f2 = self.frame_at, other.frame_at
        d1, d2 = self.derivative_at, other.derivative_at
        deriv = None
        if d1 is not None and d2 is not None:
            deriv = lambda s: d1(s) if s <= b else d2(s - shift)  # noqa: E731
        return FramePath(
            self.manifold,
            lambda s: f1(s) if s <= b else f2(s - shift),
            (a, d + shift),
            deriv,
            self.h_s,
        )


@dataclass
class MatrixPath:
    """A path of symmetric matrices given directly, one block (label ignored)."""

    D_at: Callable[[float], np.ndarray]
    Ddot_at: Callable[[float], np.ndarray]
    s_range: tuple = (-1.0, 1.0)
    manifold: object = None

    def D(self, s, label=None):
        return np.asarray(self.D_at(s), dtype=float)

    def Ddot(self, s, label=None):
        return np.asarray(self.Ddot_at(s), dtype=float)

    def check(self, grid) -> None:
        return None

    def reversed(self) -> "MatrixPath":
        a, b = self.s_range
        D, Dd = self.D_at, self.Ddot_at
        return MatrixPath(lambda s: D(a + b - s), lambda s: -np.asarray(Dd(a + b - s)), (a, b), self.manifold)


def polynomial_path(coeffs, s_range=(-1.0, 1.0)) -> MatrixPath:
    """Model family D(s) = sum_k s^k D_k of symmetric matrices."""
    C = [np.asarray(c, dtype=float) for c in coeffs]
    if not C or any(c.shape != C[0].shape or c.ndim != 2 or c.shape[0] != c.shape[1] for c in C):
        raise ValueError("coefficients must be square matrices of one size")
    if any(not np.allclose(c, c.T) for c in C):
        raise ValueError("coefficients must be symmetric")

    def D(s):
        return sum(s**k * c for k, c in enumerate(C))

    def Ddot(s):
        return sum(k * s ** (k - 1) * c for k, c in enumerate(C) if k)

    return MatrixPath(D, Ddot, tuple(s_range))


def constant_path(f: FrameSpec, s_range=(0.0, 1.0)) -> FramePath:
    U = f.U.copy()
    return FramePath(f.manifold, lambda s: U, s_range, lambda s: np.zeros((3, 3)))


def linear_path(manifold: str, U0, U1, s_range=(0.0, 1.0)) -> FramePath:
    U0 = np.asarray(U0, dtype=float)
    U1 = np.asarray(U1, dtype=float)
    a, b = s_range
    dU = (U1 - U0) / (b - a)
    return FramePath(manifold, lambda s: U0 + (s - a) * dU, s_range, lambda s: dU)


def _rot1(phi):
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _drot1(phi):
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[0, 0, 0], [0, -s, -c], [0, c, -s]])


def s3_catalog_path(s_range=(0.0, 1.2)) -> FramePath:
    """U(s) = diag(2^(2s/3), 2^(-s/3), 2^(-s/3)) R_1(pi s), singular at s = 1."""
    ln2 = np.log(2.0)
    rates = np.array([2 * ln2 / 3, -ln2 / 3, -ln2 / 3])

    def U(s):
        return np.diag(np.exp(rates * s)) @ _rot1(np.pi * s)

    def dU(s):
        Dg = np.diag(np.exp(rates * s))
        return np.diag(rates) @ Dg @ _rot1(np.pi * s) + np.pi * Dg @ _drot1(np.pi * s)

    return FramePath(SPHERE3, U, s_range, dU)


def perturbation_path(f: FrameSpec, s_range=(-0.1, 0.1)) -> FramePath:
    """s -> v + s w with w the bracket fields of v (S^3 invariant frames)."""
    if f.manifold != SPHERE3:
        raise ValueError("perturbation path implemented for invariant S^3 frames")
    U0 = f.U.copy()
    # w_i = 2 (u_j x u_k) y, read off at y = 1
    W = bracket_fields(f, np.array([1.0, 0, 0, 0]))[:, 1:].T
    return FramePath(SPHERE3, lambda s: U0 + s * W, s_range, lambda s: W)


# --------------------------------------------------------------- eigencurves


@dataclass
class EigenCurves:
    label: object
    s: np.ndarray
    values: np.ndarray  # (ns, n) matched curves
    continuity: float


def _clusters(w, tol):
    """Group labels for eigenvalues (any order) that agree up to tol."""
    order = np.argsort(w, kind="stable")
    groups = np.zeros(len(w), dtype=int)
    g = 0
    for a in range(1, len(w)):
        if w[order[a]] - w[order[a - 1]] > tol:
            g += 1
        groups[order[a]] = g
    return groups


def eigencurves(p: FramePath, labels, grid) -> list[EigenCurves]:
    grid = np.asarray(grid, dtype=float)
    p.check(grid)
    out = []
    for label in labels:
        prev_V = None
        prev_w = None
        rows = []
        for s in grid:
            w, V = eigh_sorted(p.D(s, label))
            if prev_V is not None:
                O = (prev_V.T @ V) ** 2
                r, c = linear_sum_assignment(-O)
                perm = np.empty(len(w), dtype=int)
                perm[r] = c
                scale = max(1.0, float(np.max(np.abs(w))), float(np.max(np.abs(prev_w))))
                cur_groups = _clusters(w, 1e-8 * scale)
                prev_groups = _clusters(prev_w, 1e-8 * scale)
                # degenerate clusters carry arbitrary bases, so compare subspaces
                for g in np.unique(prev_groups):
                    rows_g = np.flatnonzero(prev_groups == g)
                    cols_g = np.isin(cur_groups, cur_groups[perm[rows_g]])
                    mass = O[np.ix_(rows_g, np.flatnonzero(cols_g))].sum() / len(rows_g)
                    if mass < 0.5:
                        raise MatchingAmbiguity(
                            f"overlap {mass:.2f} at s={s:.6g} in block {label}; refine the grid"
                        )
                w, V = w[perm], V[:, perm]
            rows.append(w)
            prev_V = V
            prev_w = w
        vals = np.array(rows)
        cont = float(np.max(np.abs(np.diff(vals, axis=0)))) if len(grid) > 1 else 0.0
        out.append(EigenCurves(label, grid, vals, cont))
    return out


# ----------------------------------------------------------------- crossings


@dataclass
class CrossingReport:
    s_star: float
    label: object
    kernel_basis: np.ndarray
    gamma: np.ndarray
    signature: int
    slopes: np.ndarray
    gamma_eigenvalues: np.ndarray
    weight: Fraction = Fraction(1)

    @property
    def regular(self) -> bool:
        return True

    def to_json(self) -> dict:
        return {
            "s_star": self.s_star,
            "block": str(self.label),
            "kernel_dim": int(self.kernel_basis.shape[1]),
            "signature": self.signature,
            "weight": str(self.weight),
            "gamma_eigenvalues": [float(x) for x in self.gamma_eigenvalues],
            "slopes": [float(x) for x in self.slopes],
        }


def _kernel(D: np.ndarray, ktol: float):
    w, V = eigh_sorted(D)
    mask = np.abs(w) <= ktol
    return w, V[:, mask]


def crossing_form(
    p: FramePath,
    s_star: float,
    label,
    ktol: float = 1e-7,
    h: float = 1e-4,
    degeneracy_tol: float = 1e-8,
) -> CrossingReport:
    """Crossing form Gamma = K^T Ddot K on the numerical kernel at s_star."""
    D = p.D(s_star, label)
    scale = max(1.0, float(np.max(np.abs(D))))
    w, K = _kernel(D, ktol * scale)
    if K.shape[1] == 0:
        raise ValueError(f"no kernel at s={s_star} in block {label}")
    Dd = p.Ddot(s_star, label)
    G = K.T @ Dd @ K
    G = 0.5 * (G + G.T)
    g = np.linalg.eigvalsh(G)
    dscale = max(1.0, float(np.max(np.abs(Dd))))
    if np.min(np.abs(g)) <= degeneracy_tol * dscale:
        raise NonRegularCrossing(
            f"degenerate crossing form at s={s_star:.10g} in block {label}: eig {g}"
        )
    sig = int(np.sum(g > 0) - np.sum(g < 0))
    slopes = _slopes(p, s_star, label, K.shape[1], h)
    return CrossingReport(
        float(s_star), label, K, G, sig, slopes, g, block_weight(p.manifold, label)
    )


def _near_zero(p: FramePath, s, label, k):
    w = np.linalg.eigvalsh(p.D(s, label))
    idx = np.argsort(np.abs(w), kind="stable")[:k]
    return np.sort(w[idx])


def _slopes(p: FramePath, s_star, label, k, h):
    w0 = _near_zero(p, s_star, label, k)
    wp = _near_zero(p, s_star + h, label, k)
    wm = _near_zero(p, s_star - h, label, k)
    # branches through zero: sorted(w(+h)) ~ h sorted(a), sorted(-w(-h)) ~ h sorted(a)
    return (np.sort(wp - w0.mean()) + np.sort(w0.mean() - wm)) / (2 * h)


def slope_vs_gamma(p: FramePath, report: CrossingReport) -> float:
    """Max relative discrepancy between eigenvalue slopes and eig(Gamma)."""
    g = np.sort(report.gamma_eigenvalues)
    s = np.sort(report.slopes)
    return float(np.max(np.abs(s - g) / np.maximum(1.0, np.abs(g))))


def _neg_strict(p: FramePath, s, label) -> int:
    # structural zeros come out exactly 0 from eigh_sorted, so a strict sign
    # count is safe and does not smear flat crossings over a tolerance band
    return int(np.sum(eigh_sorted(p.D(s, label))[0] < 0))


def _localize(p: FramePath, a, b, label, ztol, stol):
    na = _neg_strict(p, a, label)
    nb = _neg_strict(p, b, label)
    if na != nb:
        while b - a > stol:
            m = 0.5 * (a + b)
            if _neg_strict(p, m, label) == na:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    def smin(s):
        return float(np.min(np.abs(np.linalg.eigvalsh(p.D(s, label)))))

    res = minimize_scalar(smin, bounds=(a, b), method="bounded", options={"xatol": stol})
    return float(res.x)


def _crossings_in(p: FramePath, a, b, label, ztol, stol, depth=0):
    """All regular crossings in (a, b) that change the negative index.

    After one crossing is localized, its signature must account for the
    change of the negative index over (a, b); otherwise the two sides are
    searched again, so several crossings in one grid interval are resolved.
    """
    s_star = _localize(p, a, b, label, ztol, stol)
    rep = crossing_form(p, s_star, label)
    change = _neg_strict(p, a, label) - _neg_strict(p, b, label)
    if change == rep.signature or depth >= 30:
        return [rep]
    out = [rep]
    delta = 1e-6 * (b - a)
    for lo, hi in ((a, s_star - delta), (s_star + delta, b)):
        if hi > lo and _neg_strict(p, lo, label) != _neg_strict(p, hi, label):
            out.extend(_crossings_in(p, lo, hi, label, ztol, stol, depth + 1))
    return out


def find_crossings(
    p: FramePath,
    labels,
    n_grid: int = 121,
    stol: float = 1e-10,
    ztol: float = 1e-12,
) -> tuple[list[CrossingReport], dict]:
    """Locate crossings from sign changes of matched eigenvalue curves.

    Returns the crossing reports (sorted by block order, then s) and the
    signed curve count per block: +1 for every curve going from negative to
    positive, -1 for the reverse.
    """
    a, b = p.s_range
    grid = np.linspace(a, b, n_grid)
    curves = eigencurves(p, labels, grid)
    reports = []
    counts = {}
    for c in curves:
        v = c.values
        sgn = np.sign(np.where(np.abs(v) <= ztol, 0.0, v))
        if np.any(sgn[0] == 0) or np.any(sgn[-1] == 0):
            raise ValueError(f"endpoint of the path is singular in block {c.label}")
        # signed count over nonzero samples of each curve
        total = 0
        intervals = set()
        for col in range(v.shape[1]):
            nz = np.flatnonzero(sgn[:, col])
            for i0, i1 in zip(nz[:-1], nz[1:]):
                if sgn[i0, col] != sgn[i1, col]:
                    total += int(sgn[i1, col] > 0) - int(sgn[i1, col] < 0)
                    intervals.add((i0, i1))
        counts[c.label] = total
        for i0, i1 in sorted(intervals):
            for rep in _crossings_in(p, grid[i0], grid[i1], c.label, ztol, stol):
                if not any(abs(r.s_star - rep.s_star) < 1e-8 and r.label == rep.label for r in reports):
                    reports.append(rep)
    return reports, counts


@dataclass
class FlowResult:
    flow: int
    curve_count: int
    crossings: list = field(default_factory=list)
    per_block: dict = field(default_factory=dict)


def spectral_flow(
    p: FramePath,
    labels=None,
    n_grid: int = 121,
    include_constants: bool = False,
) -> FlowResult:
    """Sum of crossing-form signatures, weighted by block multiplicity."""
    if labels is None:
        labels = default_labels(p.manifold, 2, include_constants)
    elif not include_constants:
        labels = [lab for lab in labels if not _is_constant_block(p.manifold, lab)]
    reports, counts = find_crossings(p, labels, n_grid)
    flow = sum(r.signature * r.weight for r in reports)
    curve = sum(counts[lab] * block_weight(p.manifold, lab) for lab in labels)
    if Fraction(flow).denominator != 1 or Fraction(curve).denominator != 1:
        raise ValueError("non-integral flow")
    per_block = {str(lab): int(counts[lab] * block_weight(p.manifold, lab)) for lab in labels}
    return FlowResult(int(flow), int(curve), reports, per_block)
