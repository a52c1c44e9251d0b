"""Exact invariant blocks of the Fueter operator and regular/singular classification.

Torus3
    The modes cos(2 pi k.y), sin(2 pi k.y) with fixed k span an invariant
    8-dimensional space (tensored with H).  On coefficients (p, q) of
    cos * p + sin * q the operator is [[0, K], [-K, 0]] with
    K = 2 pi sum_i (U^T k)_i J_i.
Sphere3
    For v_i(y) = u_i y the derivatives are left-translation generators, so
    each spin-j isotypic component is invariant.  One block is
    sum_a J_a (x) rho_j(u_a)^T on H (x) C^(2j+1), realified to a real
    symmetric matrix of side 8(2j+1).  The real function space contains
    (2j+1)/2 copies of it (j = 0 is stored as the 4x4 zero block, one copy).
ProductS1S2
    Galerkin projection onto e^{i m theta} Y_l^mu (x) H, l <= L_max,
    |m| <= M_max.  The operator commutes with d/dtheta, so it splits into
    one block per m >= 0 (cos/sin pair for m > 0).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fields import half_lattice
from .frames import PRODUCT_S1S2, SPHERE3, TORUS3, FrameSpec, spinc_lambda
from .harmonics import coordinate_multipliers, rotation_generators, sh_labels
from .quaternion import J_MATRICES
from .su2 import as_spin, realify, spin_label, su2_generators

__all__ = [
    "SpectralBlock",
    "SpectralError",
    "UncertifiedTruncation",
    "t3_block",
    "s3_block",
    "s1s2_block",
    "s1s2_operator",
    "block_parts",
    "block_labels",
    "blocks_for",
    "eigh_sorted",
    "KernelResult",
    "kernel_dimension",
    "classify",
    "verify_dd2",
    "dirac_spectrum_shift",
    "polynomial_kernel",
    "neglected_block_bound",
    "parallel_map",
]

Q = "1ijk"


class SpectralError(RuntimeError):
    """Numerical kernel decision is ambiguous."""


class UncertifiedTruncation(SpectralError):
    """The neglected blocks are not provably bounded away from zero."""


@dataclass
class SpectralBlock:
    manifold: str
    label: object
    matrix: np.ndarray
    basis: list
    weight: Fraction = Fraction(1)
    _eig: tuple | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def eigh(self):
        if self._eig is None:
            self._eig = eigh_sorted(self.matrix)
        return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigh()[0]

    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T))) if self.size else 0.0

    def label_str(self) -> str:
        if self.manifold == TORUS3:
            return "k=" + ",".join(str(c) for c in self.label)
        if self.manifold == SPHERE3:
            return "j=" + spin_label(self.label)
        return "m=%d" % self.label[2] if len(self.label) == 3 else str(self.label)


def eigh_sorted(A: np.ndarray):
    """Ascending eigenvalues and orthonormal eigenvectors of a real symmetric matrix.

    Rows that are exactly zero (e.g. constant functions) are deflated first, so
    their eigenvalues are exactly 0 instead of round-off from the dense solver.
    """
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    zero = ~np.any(A != 0.0, axis=1)
    if not zero.any():
        return np.linalg.eigh(A)
    keep = np.flatnonzero(~zero)
    w = np.zeros(n)
    V = np.zeros((n, n))
    nz = int(zero.sum())
    V[np.flatnonzero(zero), np.arange(nz)] = 1.0
    if keep.size:
        wk, Vk = np.linalg.eigh(A[np.ix_(keep, keep)])
        w[nz:] = wk
        V[np.ix_(keep, np.arange(nz, n))] = Vk
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


# ---------------------------------------------------------------- Torus3


def _torus_parts(U, k):
    k = np.asarray(k, dtype=float)
    kappa = 2 * np.pi * (np.asarray(U, dtype=float).T @ k)
    K = np.einsum("a,apq->pq", kappa, J_MATRICES)
    Z = np.zeros((4, 4))
    D = np.block([[Z, K], [-K, Z]])
    Lv = -float(kappa @ kappa) * np.eye(8)
    return D, Lv, np.zeros((8, 8))


def t3_block(U, k) -> SpectralBlock:
    k = tuple(int(c) for c in k)
    if k == (0, 0, 0):
        return SpectralBlock(TORUS3, k, np.zeros((4, 4)), [f"1*{q}" for q in Q])
    D, _, _ = _torus_parts(U, k)
    basis = [f"cos*{q}" for q in Q] + [f"sin*{q}" for q in Q]
    return SpectralBlock(TORUS3, k, D, basis)


# ---------------------------------------------------------------- Sphere3


def _s3_rep(vec, j) -> np.ndarray:
    """Coefficient action of the derivative along y -> q y, q = Im part vec."""
    X = su2_generators(j)
    return np.einsum("b,bpq->pq", np.asarray(vec, dtype=float), X).T


def _s3_parts(U, j):
    jf = as_spin(j)
    if jf == 0:
        Z = np.zeros((4, 4))
        return Z, Z, Z
    U = np.asarray(U, dtype=float)
    Y = [_s3_rep(U[:, a], jf) for a in range(3)]
    D = sum(np.kron(J_MATRICES[a], Y[a]) for a in range(3))
    n = Y[0].shape[0]
    Lv = sum(np.kron(np.eye(4), Y[a] @ Y[a]) for a in range(3))
    W = 0
    for i in range(3):
        j_, k_ = (i + 1) % 3, (i + 2) % 3
        w = 2 * np.cross(U[:, j_], U[:, k_])
        W = W + np.kron(J_MATRICES[i], _s3_rep(w, jf))
    assert D.shape == (4 * n, 4 * n)
    return realify(D), realify(Lv), realify(W)


def s3_block(U, j) -> SpectralBlock:
    jf = as_spin(j)
    D, _, _ = _s3_parts(U, jf)
    if jf == 0:
        return SpectralBlock(SPHERE3, jf, D, [f"1*{q}" for q in Q])
    ms = [str(jf - a) for a in range(int(2 * jf) + 1)]
    basis = [f"{part}:{q}:m={m}" for part in ("re", "im") for q in Q for m in ms]
    return SpectralBlock(SPHERE3, jf, D, basis, weight=Fraction(int(2 * jf) + 1, 2))


# ---------------------------------------------------------------- ProductS1S2


def s1s2_block(L_max: int, m: int) -> SpectralBlock:
    """Block of the Galerkin operator on Fourier mode m >= 0."""
    if L_max < 2:
        raise ValueError("L_max must be at least 2")
    R = rotation_generators(L_max)
    Y = coordinate_multipliers(L_max)
    if m == 0:
        A = [R[a] for a in range(3)]
        kinds = ["c"]
    else:
        T = np.array([[0.0, m], [-m, 0.0]])
        A = [np.kron(T, Y[a]) + np.kron(np.eye(2), R[a]) for a in range(3)]
        kinds = ["c", "s"]
    D = sum(np.kron(J_MATRICES[a], A[a]) for a in range(3))
    basis = [
        f"{q}:{'1' if m == 0 else kind + str(m)}:Y{l},{mu}"
        for q in Q
        for kind in kinds
        for l, mu in sh_labels(L_max)
    ]
    return SpectralBlock(PRODUCT_S1S2, (L_max, m), D, basis)


def s1s2_operator(L_max: int, M_max: int) -> SpectralBlock:
    """The full truncated operator as one block (block-diagonal in m)."""
    if M_max < 1:
        raise ValueError("M_max must be at least 1")
    from scipy.linalg import block_diag

    blocks = [s1s2_block(L_max, m) for m in range(M_max + 1)]
    mat = block_diag(*[b.matrix for b in blocks])
    basis = [lab for b in blocks for lab in b.basis]
    return SpectralBlock(PRODUCT_S1S2, (L_max, M_max), mat, basis)


# ---------------------------------------------------------------- sweeps


def block_labels(f: FrameSpec, cutoff: int | float | None = None):
    if f.manifold == TORUS3:
        K = 8 if cutoff is None else int(cutoff)
        return [(0, 0, 0)] + half_lattice(K)
    if f.manifold == SPHERE3:
        jmax = as_spin(6 if cutoff is None else cutoff)
        return [Fraction(n, 2) for n in range(int(2 * jmax) + 1)]
    raise ValueError("use s1s2 labels (L_max, m) for ProductS1S2")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FUETERLAB_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Deterministic map: results are returned in input order."""
    items = list(items)
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def make_block(f: FrameSpec, label) -> SpectralBlock:
    if f.manifold == TORUS3:
        return t3_block(f.U, label)
    if f.manifold == SPHERE3:
        return s3_block(f.U, label)
    L_max, m = label[0], label[-1]
    return s1s2_block(L_max, m)


def _torus_blocks(U, labels) -> list[SpectralBlock]:
    """Batched assembly and eigensolve of the 8x8 torus blocks."""
    labels = [tuple(int(c) for c in k) for k in labels]
    nz = [k for k in labels if k != (0, 0, 0)]
    out = {}
    if nz:
        kappa = 2 * np.pi * np.asarray(nz, dtype=float) @ np.asarray(U, dtype=float)
        K = np.einsum("na,apq->npq", kappa, J_MATRICES)
        stack = np.zeros((len(nz), 8, 8))
        stack[:, :4, 4:] = K
        stack[:, 4:, :4] = -K
        w, V = np.linalg.eigh(stack)
        basis = [f"cos*{q}" for q in Q] + [f"sin*{q}" for q in Q]
        for n, k in enumerate(nz):
            out[k] = SpectralBlock(TORUS3, k, stack[n], basis, _eig=(w[n], V[n]))
    blocks = [out[k] if k in out else t3_block(U, k) for k in labels]
    for b in blocks:
        b.eigh()
    return blocks


def blocks_for(f: FrameSpec, labels) -> list[SpectralBlock]:
    if f.manifold == TORUS3:
        return _torus_blocks(f.U, labels)

    def build(label):
        b = make_block(f, label)
        b.eigh()
        return b

    return parallel_map(build, labels)


def block_parts(f: FrameSpec, label):
    """Assembled matrices (D, L_v, d_w) on one block."""
    if f.manifold == TORUS3:
        if tuple(label) == (0, 0, 0):
            Z = np.zeros((4, 4))
            return Z, Z, Z
        return _torus_parts(f.U, label)
    if f.manifold == SPHERE3:
        return _s3_parts(f.U, label)
    raise ValueError("operator identity check is implemented for T^3 and S^3 blocks")


def neglected_block_bound(f: FrameSpec, cutoff) -> float:
    """Lower bound on |eigenvalue| over all blocks beyond the cutoff.

    Torus3: every eigenvalue of block k is +-2 pi |U^T k| >= 2 pi s_min |k|.
    Sphere3: D^2 = -L_v - d_w with -L_v >= 4 s_min^2 j(j+1) and
    ||d_w|| <= 4 j sum_i |u_j x u_k|, a bound increasing in j.
    """
    s = np.linalg.svd(f.U, compute_uv=False)
    smin = float(s[-1])
    if f.manifold == TORUS3:
        return 2 * np.pi * smin * (int(cutoff) + 1)
    if f.manifold == SPHERE3:
        U = f.U
        c = sum(np.linalg.norm(np.cross(U[:, (i + 1) % 3], U[:, (i + 2) % 3])) for i in range(3))
        j0 = float(as_spin(cutoff)) + 0.5

        def bound2(j):
            return 4 * smin**2 * j * (j + 1) - 4 * c * j

        if 8 * smin**2 * j0 + 4 * smin**2 - 4 * c <= 0:
            return 0.0  # not yet increasing: no certificate
        return float(np.sqrt(max(bound2(j0), 0.0)))
    raise ValueError("no a-priori bound for ProductS1S2")


@dataclass
class KernelResult:
    dimension: int
    tol: float
    gap: float
    neglected_bound: float
    per_block: dict

    @property
    def regular(self) -> bool:
        return self.dimension == 4


def _count(blocks, tol, gap_factor):
    dim = 0
    per_block = {}
    gap = np.inf
    for b in blocks:
        w = np.abs(b.eigenvalues)
        small = int(np.sum(w < tol))
        ambiguous = (w >= tol) & (w < gap_factor * tol)
        if np.any(ambiguous):
            raise SpectralError(
                f"eigenvalue {w[ambiguous].min():.3e} in block {b.label_str()} lies inside the "
                f"ambiguity band [{tol:.1e}, {gap_factor * tol:.1e})"
            )
        rest = w[w >= tol]
        if rest.size:
            gap = min(gap, float(rest.min()))
        cnt = small * b.weight
        if cnt.denominator != 1:
            raise SpectralError(f"non-integral kernel count in block {b.label_str()}")
        per_block[b.label_str()] = int(cnt)
        dim += int(cnt)
    return dim, per_block, gap


def kernel_dimension(
    f: FrameSpec,
    cutoff=None,
    tol: float = 1e-8,
    gap_factor: float = 100.0,
    M_max: int = 4,
) -> KernelResult:
    """Kernel dimension of the Fueter operator over all blocks up to ``cutoff``.

    Torus3 cutoff is K_max (|k|_inf <= K_max, default 8), Sphere3 cutoff is
    j_max (default 6), ProductS1S2 cutoff is L_max (default 8) with Fourier
    modes |m| <= M_max; the latter has no a-priori tail bound, and the
    tolerance band should be read together with the returned gap.
    """
    if f.manifold == PRODUCT_S1S2:
        L = 8 if cutoff is None else int(cutoff)
        blocks = blocks_for(f, [(L, m) for m in range(M_max + 1)])
        dim, per_block, gap = _count(blocks, tol, gap_factor)
        return KernelResult(dim, tol, gap, float("nan"), per_block)
    labels = block_labels(f, cutoff)
    cutoff = 8 if (cutoff is None and f.manifold == TORUS3) else cutoff
    cutoff = 6 if cutoff is None else cutoff
    bound = neglected_block_bound(f, cutoff)
    if not bound > gap_factor * tol:
        raise UncertifiedTruncation(
            f"neglected blocks only bounded below by {bound:.3e}; raise the cutoff"
        )
    dim, per_block, gap = _count(blocks_for(f, labels), tol, gap_factor)
    return KernelResult(dim, tol, gap, bound, per_block)


def classify(f: FrameSpec, **kw) -> str:
    return "Regular" if kernel_dimension(f, **kw).dimension == 4 else "Singular"


def verify_dd2(f: FrameSpec, label) -> float:
    """max |D^2 + L_v + d_w| on one block."""
    D, Lv, W = block_parts(f, label)
    return float(np.max(np.abs(D @ D + Lv + W)))


def dirac_spectrum_shift(f: FrameSpec, label) -> np.ndarray:
    """Eigenvalues of the block of D_v + lambda_spinc."""
    from .frames import random_points

    pts = random_points(f.manifold, 16, np.random.default_rng(0))
    lam = spinc_lambda(f, pts)
    if np.ptp(lam) > 1e-10:
        raise SpectralError("spin-c shift is not constant on M")
    return make_block(f, label).eigenvalues + float(lam[0])


def polynomial_kernel(f: FrameSpec, degree: int = 1, tol: float = 1e-10):
    """Kernel of the Fueter operator on mean-zero S^3 polynomial fields of a fixed degree.

    Built directly from the coefficient action of the derivatives on
    monomials (no representation theory), so it serves as an independent
    check of the block computation.  Returns FieldExpansions whose
    coefficient vectors are orthonormal.
    """
    from .fields import FieldExpansion, apply_fueter, sphere3_basis

    if f.manifold != SPHERE3:
        raise ValueError("polynomial kernel is implemented on Sphere3")
    basis = sphere3_basis(degree)
    cols = [a for a, e in enumerate(basis) if sum(e) == degree]
    n = len(basis)
    A = np.zeros((4 * n, 4 * len(cols)))
    for c, a in enumerate(cols):
        for r in range(4):
            coeffs = np.zeros((n, 1, 4))
            coeffs[a, 0, r] = 1.0
            g = FieldExpansion(SPHERE3, basis, coeffs, (degree,))
            A[:, 4 * c + r] = apply_fueter(f, g).coeffs.ravel()
    _, s, Vt = np.linalg.svd(A)
    s = np.concatenate([s, np.zeros(Vt.shape[0] - len(s))])
    null = Vt[s <= tol * max(1.0, s[0])]
    out = []
    for v in null:
        coeffs = np.zeros((n, 1, 4))
        coeffs[cols] = v.reshape(len(cols), 1, 4)
        out.append(FieldExpansion(SPHERE3, basis, coeffs, (degree,)))
    return out
