import numpy as np
import pytest

from fueterlab.floer import (
    DegenerateCriticalPoint,
    FloerProblem,
    HamiltonianSpec,
    NoConvergence,
    TorusGrid,
    action_is_monotone,
    action_profile,
    arnold_count,
    floer_energy_residual,
    floer_trajectory,
    ode_oracle,
    solve_critical,
)
from fueterlab.frames import torus3

from conftest import random_glplus

EPS = 0.1
F_MINUS = np.array([0.5, 0.5, 0.5, 0.5])
F_PLUS = np.array([0.0, 0.5, 0.5, 0.5])


def exact_profile(s, eps=EPS):
    return np.arctan(np.exp(-4 * np.pi**2 * eps * s)) / np.pi


def test_hamiltonian_derivatives(rng):
    H = HamiltonianSpec.random(rng, n=1, n_terms=5, amp=0.3, kmax=2)
    assert H.gradient_check(rng) < 1e-6
    y, x = rng.random((3, 3)), rng.random((3, 4))
    Hx = H.hessian(y, x)
    assert np.allclose(Hx, np.swapaxes(Hx, 1, 2))


def test_hamiltonian_json_roundtrip(rng):
    H = HamiltonianSpec.random(rng, n=1, n_terms=3)
    assert HamiltonianSpec.from_json(H.to_json()) == H


def test_grid_basics(rng):
    g = TorusGrid(torus3(random_glplus(rng)), N=4)
    assert np.allclose(g.Q.T @ g.Q, np.eye(g.nbasis), atol=1e-12)
    C = g.constant(np.array([0.1, 0.2, 0.3, 0.4]))
    assert np.allclose(g.fueter(C), 0.0, atol=1e-12)
    assert np.allclose(g.mean(C), [0.1, 0.2, 0.3, 0.4])


def test_jacobian_matches_finite_difference(rng):
    H = HamiltonianSpec.random(rng, n_terms=4, amp=0.2, kmax=1)
    g = TorusGrid(torus3(random_glplus(rng)), N=4)
    C = rng.standard_normal((g.nbasis, 4)) * 0.1
    J = g.jacobian(C, H)
    dC = rng.standard_normal(C.shape)
    h = 1e-6
    fd = (g.residual(C + h * dC, H) - g.residual(C - h * dC, H)).ravel() / (2 * h)
    assert np.allclose(J @ dC.ravel(), fd, atol=1e-6)


def test_constant_critical_point():
    H = HamiltonianSpec.cosine(EPS)
    cp = solve_critical(torus3(), H, np.array([0.5, 0.0, 0.5, 0.0]))
    assert cp.residual < 1e-10 and cp.is_constant and cp.nondegenerate()
    assert cp.action == pytest.approx(0.0, abs=1e-12)


def test_nonconstant_solution_for_y_dependent_h(rng):
    H = HamiltonianSpec.cosine(0.05).with_terms([(0.05, (1, 0, 0), (1, 0, 0, 0), 0.3)])
    cp = solve_critical(torus3(), H, np.zeros(4))
    assert cp.residual < 1e-10
    assert not cp.is_constant
    assert cp.nondegenerate()


def test_arnold_count_small_eps():
    res = arnold_count(torus3(), HamiltonianSpec.cosine(1e-2), multistart=2)
    assert res.count == 16
    assert all(s.nondegenerate() for s in res.solutions)


def test_zero_hamiltonian_is_degenerate():
    with pytest.raises(DegenerateCriticalPoint):
        arnold_count(torus3(), HamiltonianSpec.zero(), multistart=0, lattice=2)


def test_newton_failure_reports_best_iterate():
    H = HamiltonianSpec.cosine(EPS)
    with pytest.raises(NoConvergence) as info:
        solve_critical(torus3(), H, np.array([0.3, 0.1, 0.2, 0.4]), max_iter=1)
    assert info.value.best is not None


def test_ode_oracle_closed_form():
    s = np.linspace(-2, 2, 9)
    x = ode_oracle(HamiltonianSpec.cosine(EPS), np.array([0.25, 0.5, 0.5, 0.5]), s)
    assert np.allclose(x[:, 0], exact_profile(s), atol=1e-10)
    assert np.allclose(x[:, 1:], 0.5)


def test_problem_validation():
    H = HamiltonianSpec.cosine(EPS)
    with pytest.raises(ValueError):
        FloerProblem(torus3(), H, F_MINUS, F_PLUS, Ns=60)
    with pytest.raises(ValueError):
        FloerProblem(torus3(), H, np.array([0.3, 0.5, 0.5, 0.5]), F_PLUS, Ns=61)
    p = FloerProblem(torus3(), H, F_MINUS, F_PLUS, S=2.0, Ns=61)
    q = p.refined()
    assert q.S == 4.0 and q.Ns == 245 and q.ds < p.ds / 2
    with pytest.raises(ValueError):
        floer_trajectory(FloerProblem(torus3(), H, F_PLUS, F_MINUS, S=2.0, Ns=61))


def test_short_trajectory():
    p = FloerProblem(torus3(), HamiltonianSpec.cosine(EPS), F_MINUS, F_PLUS, S=2.0, Ns=61)
    tr = floer_trajectory(p)
    assert tr.residual < p.tol
    # the centred scheme leaves an odd-even ripple next to the Dirichlet ends
    # whose size follows the truncation error exp(-4 pi^2 eps S)
    assert action_is_monotone(tr, tol=1e-6)
    a = action_profile(tr)
    assert a[0] > a[-1]
    m = tr.means()
    assert np.max(np.abs(m[:, 0] - exact_profile(tr.s))) < 5e-3
    assert np.allclose(m[:, 1:], 0.5, atol=1e-8)
    assert floer_energy_residual(tr) < 5e-3


def test_constant_trajectory():
    p = FloerProblem(torus3(), HamiltonianSpec.cosine(EPS), F_PLUS, F_PLUS, S=1.0, Ns=21)
    tr = floer_trajectory(p)
    assert tr.energy() == pytest.approx(0.0, abs=1e-20)
