from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse
from scipy.spatial.transform import Rotation

from fueterlab import frames as fr
from fueterlab.fields import FieldExpansion, apply_fueter, identity_field_s3, sphere3_basis
from fueterlab.frames import FrameSpec, product_s1s2, random_points, singular_s3, standard_s3, torus3
from fueterlab.quaternion import J_MATRICES
from fueterlab.spectral import (
    UncertifiedTruncation,
    block_labels,
    blocks_for,
    classify,
    dirac_spectrum_shift,
    eigh_sorted,
    kernel_dimension,
    neglected_block_bound,
    polynomial_kernel,
    s1s2_block,
    s3_block,
    t3_block,
    verify_dd2,
)

from conftest import random_glplus

HALF = Fraction(1, 2)


# ------------------------------------------------------------------ Torus3


def test_torus_block_spectrum(rng):
    U = random_glplus(rng)
    for k in [(1, 0, 0), (1, -2, 1), (0, 3, 2)]:
        w = t3_block(U, k).eigenvalues
        kappa = 2 * np.pi * np.linalg.norm(U.T @ np.array(k))
        assert np.allclose(w, [-kappa] * 4 + [kappa] * 4, atol=1e-10)


def _fd_fueter(U, n):
    """Sparse 4th-order central-difference Fueter operator on an n^3 periodic grid."""
    h = 1.0 / n
    e = np.ones(n)
    D1 = sparse.diags(
        [-e, 8 * e, -8 * e, e, -e, 8 * e, -8 * e, e],
        [2, 1, -1, -2, 2 - n, 1 - n, n - 1, n - 2],
        shape=(n, n),
    ) / (12 * h)
    I = sparse.identity(n)
    grads = [
        sparse.kron(sparse.kron(D1, I), I),
        sparse.kron(sparse.kron(I, D1), I),
        sparse.kron(sparse.kron(I, I), D1),
    ]
    op = None
    for a in range(3):
        da = sum(U[c, a] * grads[c] for c in range(3))
        term = sparse.kron(da, J_MATRICES[a])
        op = term if op is None else op + term
    return op.tocsr()


def _grid_residual(U, k, n):
    blk = t3_block(U, k)
    w, V = blk.eigh()
    g = np.arange(n) / n
    Y = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    ph = 2 * np.pi * Y @ np.asarray(k, dtype=float)
    op = _fd_fueter(U, n)
    worst = 0.0
    for col in range(8):
        p, q = V[:4, col], V[4:, col]
        phi = np.cos(ph)[:, None] * p + np.sin(ph)[:, None] * q
        r = op @ phi.ravel() - w[col] * phi.ravel()
        worst = max(worst, np.linalg.norm(r) / np.linalg.norm(phi))
    return worst


def test_torus_eigenpairs_against_finite_differences(rng):
    # block eigenpairs sampled on a grid are approximate eigenpairs of an
    # independent finite-difference operator, with fourth-order error decay
    U = random_glplus(rng)
    k = (1, 0, -1)
    r1 = _grid_residual(U, k, 12)
    r2 = _grid_residual(U, k, 24)
    assert r2 < 1e-2
    assert 12 < r1 / r2 < 20


def test_torus_kernel_and_verdict(rng):
    f = torus3(random_glplus(rng))
    res = kernel_dimension(f)
    assert res.dimension == 4 and res.regular
    assert classify(f) == "Regular"
    assert res.neglected_bound > 100 * res.tol


def test_uncertified_truncation():
    f = torus3(np.diag([1.0, 1.0, 1e-3]))
    with pytest.raises(UncertifiedTruncation):
        kernel_dimension(f, cutoff=1, tol=1e-2)


# ----------------------------------------------------------------- Sphere3


def test_standard_s3_low_blocks():
    w = s3_block(np.eye(3), HALF).eigenvalues
    assert np.sum(np.abs(w + 3) < 1e-10) == 4
    assert np.allclose(s3_block(np.eye(3), 0).eigenvalues, 0.0)
    res = kernel_dimension(standard_s3())
    assert res.dimension == 4
    assert res.neglected_bound > 100 * res.tol


def _polynomial_spectrum(U, degree):
    basis = sphere3_basis(degree)
    n = len(basis)
    M = np.zeros((4 * n, 4 * n))
    f = FrameSpec(fr.SPHERE3, U)
    for a in range(n):
        for r in range(4):
            c = np.zeros((n, 1, 4))
            c[a, 0, r] = 1.0
            M[:, 4 * a + r] = apply_fueter(f, FieldExpansion(fr.SPHERE3, basis, c, (degree,))).coeffs.ravel()
    return np.sort(np.linalg.eigvals(M).real)


@settings(max_examples=10)
@given(st.integers(0, 2**31 - 1))
def test_s3_blocks_against_polynomial_oracle(seed):
    # polynomials of degree <= 3 carry the spins j <= 3/2, each block
    # repeated (2j + 1) / 2 times in the real function space
    rng = np.random.default_rng(seed)
    U = random_glplus(rng)
    expected = []
    for twoj in range(4):
        b = s3_block(U, Fraction(twoj, 2))
        w = b.eigenvalues
        if twoj == 0:
            expected.extend(w)
        else:
            copies = Fraction(twoj + 1, 2)
            # realified blocks have every eigenvalue with even multiplicity
            pairs = np.sort(w)[::2]
            expected.extend(np.repeat(pairs, int(2 * copies)))
    assert np.allclose(np.sort(expected), _polynomial_spectrum(U, 3), atol=1e-8)


@given(st.integers(0, 2**31 - 1))
def test_s3_spectrum_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    U = random_glplus(rng)
    R = Rotation.random(random_state=seed).as_matrix()
    for j in (HALF, Fraction(1), Fraction(3, 2)):
        w = s3_block(U, j).eigenvalues
        assert np.allclose(s3_block(R @ U, j).eigenvalues, w, atol=1e-9)
        assert np.allclose(s3_block(U @ R, j).eigenvalues, w, atol=1e-9)


def test_singular_s3_kernel():
    f = singular_s3()
    res = kernel_dimension(f)
    assert res.dimension >= 8
    assert classify(f) == "Singular"
    kern = polynomial_kernel(f, degree=1)
    assert len(kern) == 4
    # the inclusion y -> y lies in the span of the kernel vectors
    y = identity_field_s3().coeffs.ravel()
    B = np.stack([k.coeffs.ravel() for k in kern], axis=1)
    coef, *_ = np.linalg.lstsq(B, y, rcond=None)
    assert np.linalg.norm(B @ coef - y) / np.linalg.norm(y) < 1e-10
    assert polynomial_kernel(standard_s3(), degree=1) == []


def test_s3_neglected_bound_grows():
    f = standard_s3()
    b = [neglected_block_bound(f, Fraction(j, 2)) for j in range(4, 12)]
    assert all(x < y for x, y in zip(b, b[1:]))


# ------------------------------------------------------------------ S1 x S2


def test_s1s2_kernel():
    res = kernel_dimension(product_s1s2(), cutoff=6)
    assert res.dimension == 4
    w = s1s2_block(6, 0).eigenvalues
    assert np.sum(np.abs(w) < 1e-8) == 4


def test_s1s2_blocks_symmetric():
    for m in range(3):
        assert s1s2_block(4, m).symmetry_residual() < 1e-12


# ------------------------------------------------------------------- identities


@pytest.mark.parametrize("manifold", [fr.TORUS3, fr.SPHERE3])
def test_dd2_identity(manifold, rng):
    f = FrameSpec(manifold, random_glplus(rng))
    cutoff = 2 if manifold == fr.TORUS3 else Fraction(2)
    for lab in block_labels(f, cutoff):
        assert verify_dd2(f, lab) < 1e-10


def test_dirac_shift():
    w = dirac_spectrum_shift(standard_s3(), HALF)
    assert np.sum(np.abs(w + 1.5) < 1e-10) == 4


def test_eigh_sorted_deflates_zero_rows():
    A = np.zeros((4, 4))
    A[2:, 2:] = [[1.0, 2.0], [2.0, 1.0]]
    w, V = eigh_sorted(A)
    assert np.allclose(w, [-1, 0, 0, 3])
    assert np.allclose(V.T @ V, np.eye(4))


def test_thread_count_does_not_change_results(monkeypatch, rng):
    f = torus3(random_glplus(rng))
    labels = block_labels(f, 2)
    serial = [b.eigenvalues for b in blocks_for(f, labels)]
    monkeypatch.setenv("FUETERLAB_THREADS", "4")
    threaded = [b.eigenvalues for b in blocks_for(f, labels)]
    assert all(np.array_equal(a, b) for a, b in zip(serial, threaded))
