"""Acceptance suite: twelve criteria, each with its tolerance and runtime limit.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``;
either way one PASS/FAIL line is printed per criterion.
"""
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from fueterlab import frames as fr
from fueterlab.ample import (
    AmpleData,
    EmptyIntersection,
    convex_decompose,
    is_nondegenerate,
    nondegenerate_oracle,
    random_instance,
)
from fueterlab.fields import identity_field_s3, random_field
from fueterlab.floer import (
    FloerProblem,
    HamiltonianSpec,
    action_is_monotone,
    arnold_count,
    floer_energy_residual,
    floer_trajectory,
)
from fueterlab.frames import product_s1s2, random_points, singular_s3, spinc_lambda, standard_s3, torus3
from fueterlab.spectral import (
    block_labels,
    blocks_for,
    classify,
    dirac_spectrum_shift,
    kernel_dimension,
    polynomial_kernel,
    s1s2_block,
    s3_block,
    verify_dd2,
)
from fueterlab.specflow import s3_catalog_path, slope_vs_gamma, spectral_flow
from fueterlab.variational import (
    FourierLoop,
    energy_identity_residual,
    energy_terms,
    extremal_loop,
    isoperimetric_check,
)

HALF = Fraction(1, 2)


def _glplus(rng, n):
    out = []
    while len(out) < n:
        U = rng.standard_normal((3, 3))
        if np.linalg.det(U) > 0.05:
            out.append(U)
    return out


def criterion_1():
    rng = np.random.default_rng(1)
    worst, dims = 0.0, []
    for U in _glplus(rng, 20):
        f = torus3(U)
        dims.append(kernel_dimension(f).dimension)
        labels = block_labels(f)[1:]
        w = np.stack([b.eigenvalues for b in blocks_for(f, labels)])
        kappa = 2 * np.pi * np.linalg.norm(np.asarray(labels, dtype=float) @ U, axis=1)
        expected = np.concatenate([np.repeat(-kappa[:, None], 4, 1), np.repeat(kappa[:, None], 4, 1)], axis=1)
        worst = max(worst, float(np.abs(w - expected).max()))
    ok = all(d == 4 for d in dims) and worst < 1e-10
    return ok, f"kernel dims {set(dims)}, max block error {worst:.2e}"


def criterion_2():
    res = kernel_dimension(standard_s3(), cutoff=6)
    w = s3_block(np.eye(3), HALF).eigenvalues
    mult = int(np.sum(np.abs(w + 3) < 1e-10))
    certified = res.neglected_bound > 100 * res.tol
    ok = res.dimension == 4 and certified and mult >= 4
    return ok, f"kernel {res.dimension}, tail bound {res.neglected_bound:.3g}, mult(-3) = {mult}"


def criterion_3():
    f = singular_s3()
    res = kernel_dimension(f)
    verdict = classify(f)
    kern = polynomial_kernel(f, degree=1)
    y = identity_field_s3().coeffs.ravel()
    B = np.stack([k.coeffs.ravel() for k in kern], axis=1)
    proj = B @ np.linalg.lstsq(B, y, rcond=None)[0]
    err = np.linalg.norm(proj / np.linalg.norm(proj) - y / np.linalg.norm(y))
    ok = res.dimension >= 8 and verdict == "Singular" and err < 1e-10
    return ok, f"kernel {res.dimension}, {verdict}, |k/|k| - y/|y|| = {err:.2e}"


def criterion_4():
    small, nxt = [], []
    for L in (6, 8, 10):
        res = kernel_dimension(product_s1s2(), cutoff=L, M_max=4)
        w = np.concatenate([s1s2_block(L, m).eigenvalues for m in range(5)])
        a = np.sort(np.abs(w))
        small.append((res.dimension, float(a[3])))
        nxt.append(float(a[4]))
    dims_ok = all(d == 4 for d, _ in small)
    band = [s for _, s in small]
    shrinking = all(b2 <= b1 for b1, b2 in zip(band, band[1:]))
    ok = dims_ok and shrinking and min(nxt) >= 0.1
    return ok, f"dims {[d for d, _ in small]}, kernel band {band}, next {min(nxt):.4f}"


def criterion_5():
    rng = np.random.default_rng(5)
    worst = 0.0
    for U in _glplus(rng, 5):
        for f, cutoff in ((torus3(U), None), (fr.FrameSpec(fr.SPHERE3, U), Fraction(2))):
            for lab in block_labels(f, cutoff):
                worst = max(worst, verify_dd2(f, lab))
    return worst < 1e-10, f"max residual {worst:.2e}"


def criterion_6():
    rng = np.random.default_rng(6)
    cases = [(torus3(), (2,)), (standard_s3(), (3,)), (singular_s3(), (3,)), (product_s1s2(), (4, 2))]
    worst = 0.0
    for f, trunc in cases:
        for _ in range(10):
            worst = max(worst, energy_identity_residual(f, random_field(f.manifold, trunc, rng)))
    t = energy_terms(standard_s3(), identity_field_s3())
    target = 3 * np.pi**2
    hand = max(abs(t["dg2"] - target), abs(t["fueter2"] - t["form"] - target))
    ok = worst < 1e-8 and hand < 1e-12
    return ok, f"max residual {worst:.2e}, g(y)=y sides off 3 pi^2 by {hand:.1e}"


def criterion_7():
    rng = np.random.default_rng(7)
    ys = rng.standard_normal((20, 3))
    ys /= np.linalg.norm(ys, axis=1, keepdims=True)
    excess = -np.inf
    for _ in range(100):
        loop = FourierLoop.random(6, rng)
        for y in ys:
            lhs, rhs = isoperimetric_check(y, loop)
            excess = max(excess, lhs - rhs)
    eq = max(abs(np.subtract(*isoperimetric_check(y, extremal_loop(y)))) for y in ys)
    ok = excess <= 1e-10 and eq < 1e-10
    return ok, f"max(lhs - rhs) {excess:.3e}, extremal gap {eq:.1e}"


def criterion_8():
    rng = np.random.default_rng(8)
    worst = 0.0
    for f, lam in ((torus3(), 0.0), (standard_s3(), 1.5), (product_s1s2(), 1.0)):
        pts = random_points(f.manifold, 100, rng)
        worst = max(worst, float(np.abs(spinc_lambda(f, pts) - lam).max()))
    w = dirac_spectrum_shift(standard_s3(), HALF)
    has = bool(np.any(np.abs(w + 1.5) < 1e-10))
    return worst < 1e-10 and has, f"max lambda error {worst:.1e}, -3/2 present: {has}"


def criterion_9():
    p = s3_catalog_path()
    res = spectral_flow(p)
    back = spectral_flow(p.reversed())
    (rep,) = res.crossings
    slope = slope_vs_gamma(p, rep)
    sig_sum = sum(r.signature * r.weight for r in res.crossings)
    ok = (
        abs(rep.s_star - 1.0) < 1e-6
        and rep.regular
        and abs(rep.signature) == 4
        and slope < 1e-5
        and res.curve_count == sig_sum == res.flow
        and back.flow == -res.flow
    )
    return ok, (
        f"s* = {rep.s_star:.12f}, signature {rep.signature}, slope gap {slope:.1e}, "
        f"flow {res.flow}, curves {res.curve_count}, reversed {back.flow}"
    )


def criterion_10():
    counts = {}
    for eps in (1e-3, 1e-2, 1e-1):
        counts[eps] = arnold_count(torus3(), HamiltonianSpec.cosine(eps), N=4).count
    return all(c == 16 for c in counts.values()), f"counts {counts}"


def criterion_11():
    H = HamiltonianSpec.cosine(0.1)
    f_minus = np.array([0.5, 0.5, 0.5, 0.5])
    f_plus = np.array([0.0, 0.5, 0.5, 0.5])
    p = FloerProblem(torus3(), H, f_minus, f_plus, S=3.0, Ns=201)
    t1 = floer_trajectory(p)
    q = p.refined()
    t2 = floer_trajectory(q, guess=t1.resample(q))
    e1, e2 = floer_energy_residual(t1), floer_energy_residual(t2)
    mono = action_is_monotone(t1) and action_is_monotone(t2)
    ok = e1 < 1e-4 and e2 <= 0.5 * e1 and mono
    return ok, f"energy residual {e1:.3e} -> {e2:.3e} (ratio {e1 / e2:.2f}), monotone {mono}"


def criterion_12():
    rng = np.random.default_rng(12)
    fails = 0
    for i in range(1000):
        d = random_instance(rng)
        fails += (is_nondegenerate(d) != 0) != nondegenerate_oracle(d, seed=i)
    bad = 0
    worst = 0.0
    for i in range(100):
        d = random_instance(rng)
        target = 1 if i % 2 == 0 else -1
        dec = convex_decompose(d, target)
        worst = max(worst, dec.midpoint_error(d))
        bad += not (is_nondegenerate(dec.L1) == target == is_nondegenerate(dec.L2))
    L = np.zeros((3, 3, 3))
    L[1, 2] = L[2, 1] = [1.0, 2.0, 3.0]
    try:
        convex_decompose(AmpleData(np.zeros((3, 3)), L))
        rejected = False
    except EmptyIntersection:
        rejected = True
    ok = fails == 0 and bad == 0 and worst < 1e-12 and rejected
    return ok, f"equivalence failures {fails}, sign failures {bad}, midpoint {worst:.1e}, empty rejected {rejected}"


CRITERIA = [
    (1, "torus regularity", criterion_1, 5),
    (2, "standard S3 frame", criterion_2, 10),
    (3, "singular S3 frame", criterion_3, 10),
    (4, "S1xS2 frame", criterion_4, 60),
    (5, "dd2 operator identity", criterion_5, 10),
    (6, "energy identity", criterion_6, 10),
    (7, "isoperimetric inequality", criterion_7, 5),
    (8, "spin-c shift", criterion_8, 5),
    (9, "spectral flow", criterion_9, 60),
    (10, "Arnold count", criterion_10, 120),
    (11, "Floer energy identity", criterion_11, 120),
    (12, "ampleness", criterion_12, 5),
]


def run_criterion(number, name, fn, limit):
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    passed = bool(ok) and elapsed < limit
    line = f"criterion {number:2d} {name}: {'PASS' if passed else 'FAIL'} ({elapsed:.1f} s < {limit} s) {detail}"
    return passed, line


@pytest.mark.parametrize("number, name, fn, limit", CRITERIA, ids=[f"c{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, name, fn, limit, capsys):
    passed, line = run_criterion(number, name, fn, limit)
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


if __name__ == "__main__":
    results = [run_criterion(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(p for p, _ in results) else 1)
