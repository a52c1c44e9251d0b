"""Perturbed Fueter equation on T^3 with a flat torus target.

Fields f: T^3 -> R^{4n} are band-limited: real Fourier modes k with
|k_a| <= N/2 - 1 sampled on an N^3 grid.  The Nyquist modes are left out
because the spectral derivative annihilates them, which would otherwise
create spurious discrete solutions.  Unknowns are coefficients C of shape
(nbasis, 4n) in an orthonormal grid basis Q, so grid values are F = Q C.

Critical points solve d_v f = grad H(f); Floer trajectories solve
d_s u + d_v u = grad H(u) on [-S, S] with u(-S) = f-, u(S) = f+.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import LinearOperator, gmres, splu

from .fields import half_lattice
from .frames import TORUS3, FrameSpec
from .quaternion import J_MATRICES
from .spectral import classify

__all__ = [
    "HamiltonianSpec",
    "TorusGrid",
    "CriticalPoint",
    "ArnoldResult",
    "FloerProblem",
    "Trajectory",
    "DegenerateCriticalPoint",
    "NoConvergence",
    "solve_critical",
    "arnold_count",
    "floer_trajectory",
    "floer_energy_residual",
    "action_profile",
    "action_is_monotone",
    "ode_oracle",
]

TWO_PI = 2 * np.pi


class DegenerateCriticalPoint(RuntimeError):
    """A solution with singular linearization (nondegeneracy hypothesis fails)."""


class NoConvergence(RuntimeError):
    def __init__(self, msg, best=None, residual=np.inf):
        super().__init__(msg)
        self.best = best
        self.residual = residual


# ------------------------------------------------------------- Hamiltonian


@dataclass(frozen=True)
class HamiltonianSpec:
    """H(y, x) = sum A cos(2 pi (k.y + m.x) + phase), periodic in x in Z^{4n}.

    ``terms`` is a tuple of (A, k, m, phase) with k in Z^3 and m in Z^{4n}.
    """

    n: int = 1
    terms: tuple = ()

    @property
    def dim(self) -> int:
        return 4 * self.n

    @classmethod
    def zero(cls, n: int = 1) -> "HamiltonianSpec":
        return cls(n, ())

    @classmethod
    def cosine(cls, eps: float, n: int = 1) -> "HamiltonianSpec":
        """eps * sum_a cos(2 pi x_a)."""
        terms = []
        for a in range(4 * n):
            m = [0] * (4 * n)
            m[a] = 1
            terms.append((float(eps), (0, 0, 0), tuple(m), 0.0))
        return cls(n, tuple(terms))

    @classmethod
    def random(cls, rng, n: int = 1, n_terms: int = 4, amp: float = 1e-2, kmax: int = 1, base: float = 0.0):
        terms = list(cls.cosine(base, n).terms) if base else []
        for _ in range(n_terms):
            k = tuple(int(c) for c in rng.integers(-kmax, kmax + 1, 3))
            m = tuple(int(c) for c in rng.integers(-1, 2, 4 * n))
            if not any(m):
                m = (1,) + m[1:]
            terms.append((float(amp * rng.standard_normal()), k, m, float(rng.uniform(0, 2 * np.pi))))
        return cls(n, tuple(terms))

    def with_terms(self, extra) -> "HamiltonianSpec":
        return HamiltonianSpec(self.n, self.terms + tuple(extra))

    def _arrays(self):
        if not self.terms:
            return np.zeros(0), np.zeros((0, 3)), np.zeros((0, self.dim)), np.zeros(0)
        A = np.array([t[0] for t in self.terms], dtype=float)
        K = np.array([t[1] for t in self.terms], dtype=float)
        M = np.array([t[2] for t in self.terms], dtype=float)
        P = np.array([t[3] for t in self.terms], dtype=float)
        if M.shape[1] != self.dim:
            raise ValueError("target frequency has the wrong length")
        return A, K, M, P

    def _phase(self, y, x):
        A, K, M, P = self._arrays()
        return A, M, TWO_PI * (np.atleast_2d(y) @ K.T + np.atleast_2d(x) @ M.T) + P

    def value(self, y, x) -> np.ndarray:
        A, M, th = self._phase(y, x)
        return np.cos(th) @ A

    def gradient(self, y, x) -> np.ndarray:
        A, M, th = self._phase(y, x)
        return -(np.sin(th) * A) @ (TWO_PI * M)

    def hessian(self, y, x) -> np.ndarray:
        A, M, th = self._phase(y, x)
        return -np.einsum("pt,ta,tb->pab", np.cos(th) * A, TWO_PI * M, TWO_PI * M)

    def gradient_check(self, rng, n_points: int = 20, h: float = 1e-5) -> float:
        """Max error of the analytic gradient against central differences."""
        y = rng.uniform(0, 1, (n_points, 3))
        x = rng.uniform(0, 1, (n_points, self.dim))
        g = self.gradient(y, x)
        err = 0.0
        for a in range(self.dim):
            e = np.zeros(self.dim)
            e[a] = h
            fd = (self.value(y, x + e) - self.value(y, x - e)) / (2 * h)
            err = max(err, float(np.max(np.abs(fd - g[:, a]))))
        return err

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "terms": [
                {"amplitude": a, "k": list(k), "m": list(m), "phase": p}
                for a, k, m, p in self.terms
            ],
        }

    @classmethod
    def from_json(cls, obj) -> "HamiltonianSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        terms = tuple(
            (float(t["amplitude"]), tuple(t["k"]), tuple(t["m"]), float(t.get("phase", 0.0)))
            for t in obj.get("terms", [])
        )
        return cls(int(obj.get("n", 1)), terms)


# ------------------------------------------------------------------- grid


class TorusGrid:
    """Collocation grid and orthonormal band-limited basis on T^3."""

    def __init__(self, f: FrameSpec, N: int = 4, n: int = 1):
        if f.manifold != TORUS3:
            raise ValueError("the nonlinear solver runs on Torus3 only")
        if N < 4 or N % 2:
            raise ValueError("grid size N must be even and at least 4")
        self.frame = f
        self.N = N
        self.n = n
        self.K = N // 2 - 1
        g = np.arange(N) / N
        self.points = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
        modes = half_lattice(self.K)
        self.labels = [("c", (0, 0, 0))] + [(kind, k) for k in modes for kind in ("c", "s")]
        npts = len(self.points)
        cols = [np.ones(npts) / np.sqrt(npts)]
        for k in modes:
            ph = TWO_PI * self.points @ np.asarray(k, dtype=float)
            cols += [np.cos(ph) * np.sqrt(2.0 / npts), np.sin(ph) * np.sqrt(2.0 / npts)]
        self.Q = np.stack(cols, axis=1)
        nb = self.Q.shape[1]
        Da = np.zeros((3, nb, nb))
        for idx, k in enumerate(modes):
            c, s = 1 + 2 * idx, 2 + 2 * idx
            for a in range(3):
                Da[a, s, c] = -TWO_PI * k[a]
                Da[a, c, s] = TWO_PI * k[a]
        # d/dv_i = sum_a U[a, i] d/dy_a ; Da[a][p, q] is the coefficient of p in d_a of q
        Dv = np.einsum("ai,apq->ipq", f.U, Da)
        self.Dv = Dv
        Jt = np.stack([np.kron(np.eye(n), J_MATRICES[i]) for i in range(3)])
        self.Jt = Jt
        self.L = sum(np.kron(Dv[i], Jt[i]) for i in range(3))

    @property
    def nbasis(self) -> int:
        return self.Q.shape[1]

    @property
    def size(self) -> int:
        return self.nbasis * 4 * self.n

    @property
    def npoints(self) -> int:
        return len(self.points)

    def values(self, C) -> np.ndarray:
        return self.Q @ np.asarray(C).reshape(self.nbasis, 4 * self.n)

    def coefficients(self, F) -> np.ndarray:
        return self.Q.T @ np.asarray(F).reshape(self.npoints, 4 * self.n)

    def constant(self, x) -> np.ndarray:
        C = np.zeros((self.nbasis, 4 * self.n))
        C[0] = np.asarray(x, dtype=float) * np.sqrt(self.npoints)
        return C

    def mean(self, C) -> np.ndarray:
        return np.asarray(C).reshape(self.nbasis, -1)[0] / np.sqrt(self.npoints)

    def fueter(self, C) -> np.ndarray:
        C = np.asarray(C).reshape(self.nbasis, 4 * self.n)
        return sum(self.Dv[i] @ C @ self.Jt[i].T for i in range(3))

    def residual(self, C, H: HamiltonianSpec) -> np.ndarray:
        F = self.values(C)
        return self.fueter(C) - self.Q.T @ H.gradient(self.points, F)

    def hessian_block(self, C, H: HamiltonianSpec) -> np.ndarray:
        Hs = H.hessian(self.points, self.values(C))
        b = self.size
        return np.einsum("yp,yrs,yq->prqs", self.Q, Hs, self.Q, optimize=True).reshape(b, b)

    def jacobian(self, C, H: HamiltonianSpec) -> np.ndarray:
        return self.L - self.hessian_block(C, H)

    def grid_residual(self, C, H: HamiltonianSpec) -> float:
        """Sup norm on the grid of the band-limited residual."""
        return float(np.max(np.abs(self.Q @ self.residual(C, H))))

    def action(self, C, H: HamiltonianSpec) -> float:
        """(1/2) int <f, d_v f> - int H(f) on T^3 (volume 1)."""
        C = np.asarray(C).reshape(self.nbasis, 4 * self.n)
        quad = 0.5 * float(np.sum(C * self.fueter(C))) / self.npoints
        return quad - float(np.mean(H.value(self.points, self.values(C))))

    def reduce_mod_lattice(self, C) -> np.ndarray:
        C = np.array(C, dtype=float).reshape(self.nbasis, 4 * self.n)
        m = self.mean(C)
        C[0] -= np.floor(m + 0.5 - 1e-9) * np.sqrt(self.npoints)
        return C


# ------------------------------------------------------- critical points


@dataclass
class CriticalPoint:
    coeffs: np.ndarray
    residual: float
    sigma_min: float
    action: float
    iterations: int
    grid: TorusGrid = field(repr=False, default=None)

    @property
    def mean(self) -> np.ndarray:
        return self.grid.mean(self.coeffs)

    @property
    def is_constant(self) -> bool:
        return bool(np.max(np.abs(self.coeffs[1:])) < 1e-9)

    def nondegenerate(self, tol: float = 1e-8) -> bool:
        return self.sigma_min > tol


def solve_critical(
    f: FrameSpec,
    H: HamiltonianSpec,
    seed,
    N: int = 4,
    tol: float = 1e-10,
    max_iter: int = 60,
    grid: TorusGrid | None = None,
) -> CriticalPoint:
    """Damped Newton for d_v f = grad H(f) on Fourier coefficients.

    ``seed`` is either a constant in R^{4n} or a coefficient array.
    Raises NoConvergence (carrying the best iterate) if the residual does not
    reach ``tol``.
    """
    grid = grid or TorusGrid(f, N, H.n)
    seed = np.asarray(seed, dtype=float)
    C = grid.constant(seed) if seed.ndim == 1 else seed.reshape(grid.nbasis, -1).copy()
    r = grid.residual(C, H)
    best = (np.inf, C)
    it = 0
    for it in range(1, max_iter + 1):
        res = float(np.max(np.abs(grid.Q @ r)))
        if res < best[0]:
            best = (res, C.copy())
        if res < tol:
            # one undamped polishing step; Newton converges quadratically here
            Jm = grid.jacobian(C, H)
            Cn = C + np.linalg.lstsq(Jm, -r.ravel(), rcond=None)[0].reshape(C.shape)
            rn = grid.residual(Cn, H)
            if np.linalg.norm(rn) < np.linalg.norm(r):
                C, r = Cn, rn
            break
        Jm = grid.jacobian(C, H)
        step = np.linalg.lstsq(Jm, -r.ravel(), rcond=None)[0].reshape(C.shape)
        t = 1.0
        norm0 = np.linalg.norm(r)
        while t > 1e-4:
            Cn = C + t * step
            rn = grid.residual(Cn, H)
            if np.linalg.norm(rn) < (1 - 1e-4 * t) * norm0:
                break
            t *= 0.5
        C, r = Cn, rn
    res = float(np.max(np.abs(grid.Q @ r)))
    if res >= tol:
        if best[0] < res:
            res, C = best
        if res >= tol:
            raise NoConvergence(f"Newton stalled at residual {res:.3e}", C, res)
    sv = np.abs(np.linalg.eigvalsh(0.5 * (grid.jacobian(C, H) + grid.jacobian(C, H).T)))
    return CriticalPoint(C, res, float(sv.min()), grid.action(C, H), it, grid)


@dataclass
class ArnoldResult:
    count: int
    solutions: list
    degenerate: list
    failures: int
    seeds: int


def _distinct(grid: TorusGrid, sols, C, tol):
    Cr = grid.reduce_mod_lattice(C)
    scale = np.sqrt(grid.npoints)
    for S in sols:
        d = Cr - S
        # compare means on the circle, nonconstant parts directly
        dm = d[0] / scale
        dm -= np.round(dm)
        if max(np.max(np.abs(dm)), np.max(np.abs(d[1:])) / scale) < tol:
            return False
    sols.append(Cr)
    return True


def arnold_count(
    f: FrameSpec,
    H: HamiltonianSpec,
    multistart: int = 8,
    N: int = 4,
    seed: int = 0,
    lattice: int = 3,
    tol_dedup: float = 1e-6,
    tol_degenerate: float = 1e-8,
    random_amplitude: float = 0.05,
) -> ArnoldResult:
    """Count distinct solutions found by multistart Newton (a lower bound).

    Seeds: the constants {0, 1/lattice, ...}^{4n} followed by ``multistart``
    random fields (random constant plus small random nonconstant part).
    Solutions are deduplicated modulo Z^{4n}.  Degenerate solutions are
    excluded from the count; if every solution is degenerate the
    nondegeneracy hypothesis fails and DegenerateCriticalPoint is raised.
    """
    if classify(f) != "Regular":
        raise ValueError("frame must be regular")
    grid = TorusGrid(f, N, H.n)
    rng = np.random.default_rng(seed)
    seeds = [np.array(c, dtype=float) / lattice for c in product(range(lattice), repeat=H.dim)]
    for _ in range(multistart):
        C = grid.constant(rng.uniform(0, 1, H.dim))
        C[1:] = random_amplitude * rng.standard_normal(C[1:].shape) * np.sqrt(grid.npoints)
        seeds.append(C)
    good, bad, keys_good, keys_bad = [], [], [], []
    failures = 0
    for s in seeds:
        try:
            cp = solve_critical(f, H, s, grid=grid)
        except NoConvergence:
            failures += 1
            continue
        if cp.nondegenerate(tol_degenerate * max(1.0, float(np.max(np.abs(grid.L))))):
            if _distinct(grid, keys_good, cp.coeffs, tol_dedup):
                good.append(cp)
        elif _distinct(grid, keys_bad, cp.coeffs, tol_dedup):
            bad.append(cp)
    if bad and not good:
        raise DegenerateCriticalPoint(
            f"{len(bad)} degenerate solutions, smallest singular value {bad[0].sigma_min:.2e}"
        )
    return ArnoldResult(len(good), good, bad, failures, len(seeds))


# ------------------------------------------------------------ trajectories


@dataclass
class FloerProblem:
    frame: FrameSpec
    H: HamiltonianSpec
    f_minus: np.ndarray
    f_plus: np.ndarray
    S: float = 3.0
    Ns: int = 121
    N: int = 4
    tol: float = 1e-6
    tol_crit: float = 1e-10
    width: float = 1.0

    def __post_init__(self):
        if self.Ns % 2 == 0:
            # the centred scheme carries an alternating mode; with an even
            # number of intervals it cancels the near-translation mode at the
            # two Dirichlet ends and the linearization becomes singular
            raise ValueError("Ns (number of s-intervals) must be odd")
        self.grid = TorusGrid(self.frame, self.N, self.H.n)
        self.f_minus = self._coeffs(self.f_minus)
        self.f_plus = self._coeffs(self.f_plus)
        for name, C in (("f-", self.f_minus), ("f+", self.f_plus)):
            res = self.grid.grid_residual(C, self.H)
            if res >= self.tol_crit:
                raise ValueError(f"endpoint {name} is not a solution (residual {res:.2e})")

    def _coeffs(self, x):
        x = np.asarray(x, dtype=float)
        return self.grid.constant(x) if x.ndim == 1 else x.reshape(self.grid.nbasis, -1).copy()

    @property
    def s(self) -> np.ndarray:
        return np.linspace(-self.S, self.S, self.Ns + 1)

    @property
    def ds(self) -> float:
        return 2 * self.S / self.Ns

    def refined(self) -> "FloerProblem":
        """Double S and halve the s-step (4 Ns + 1 intervals keeps Ns odd)."""
        return FloerProblem(
            self.frame, self.H, self.f_minus, self.f_plus, 2 * self.S, 4 * self.Ns + 1,
            self.N, self.tol, self.tol_crit, self.width,
        )


@dataclass
class Trajectory:
    problem: FloerProblem
    u: np.ndarray  # (Ns + 1, nbasis, 4n)
    residual: float
    newton_steps: int
    gmres_iterations: int

    @property
    def s(self) -> np.ndarray:
        return self.problem.s

    def resample(self, problem: "FloerProblem") -> np.ndarray:
        """Interpolate onto another s-grid, clamping to the endpoints outside."""
        flat = self.u.reshape(len(self.u), -1)
        out = np.empty((len(problem.s), flat.shape[1]))
        for c in range(flat.shape[1]):
            out[:, c] = np.interp(problem.s, self.s, flat[:, c])
        out = out.reshape((len(problem.s),) + self.u.shape[1:])
        out[problem.s < self.s[0]] = problem.f_minus
        out[problem.s > self.s[-1]] = problem.f_plus
        return out

    def means(self) -> np.ndarray:
        g = self.problem.grid
        return np.array([g.mean(C) for C in self.u])

    def energy(self) -> float:
        """int int |d_s u|^2 with midpoint differences in s."""
        p = self.problem
        d = np.diff(self.u, axis=0)
        return float(np.sum(d**2) / p.ds / p.grid.npoints)


def _slice_values(g: TorusGrid, U):
    return np.einsum("yp,mpr->myr", g.Q, U)


def _slice_fueter(g: TorusGrid, U):
    return sum(np.einsum("pq,mqr,sr->mps", g.Dv[i], U, g.Jt[i], optimize=True) for i in range(3))


def _slice_hessians(p: FloerProblem, U):
    g = p.grid
    F = _slice_values(g, U)
    m = F.shape[0]
    Hs = p.H.hessian(np.tile(g.points, (m, 1)), F.reshape(-1, F.shape[-1]))
    return Hs.reshape(m, g.npoints, F.shape[-1], F.shape[-1])


def _space_time_residual(p: FloerProblem, U):
    g, H, ds = p.grid, p.H, p.ds
    inner = U[1:-1]
    F = _slice_values(g, inner)
    m = F.shape[0]
    grad = H.gradient(np.tile(g.points, (m, 1)), F.reshape(-1, F.shape[-1])).reshape(F.shape)
    return (U[2:] - U[:-2]) / (2 * ds) + _slice_fueter(g, inner) - np.einsum("yp,myr->mpr", g.Q, grad)


def _space_time_jacobian(p: FloerProblem, U) -> sparse.csc_matrix:
    g, ds = p.grid, p.ds
    m = len(U) - 2
    b = g.size
    Hs = _slice_hessians(p, U[1:-1])
    blocks = g.L[None] - np.einsum("yp,myrs,yq->mprqs", g.Q, Hs, g.Q, optimize=True).reshape(m, b, b)
    D = sparse.bsr_matrix((blocks, np.arange(m), np.arange(m + 1)), shape=(m * b, m * b))
    off = sparse.eye(m, k=1) - sparse.eye(m, k=-1)
    return (D.tocsr() + sparse.kron(off, sparse.eye(b)) / (2 * ds)).tocsc()


def _jv(p: FloerProblem, U, V, Hs=None):
    """Matrix-free linearization applied to interior increments V (m, nb, 4n)."""
    g, ds = p.grid, p.ds
    if Hs is None:
        Hs = _slice_hessians(p, U[1:-1])
    Vp = np.concatenate([np.zeros_like(V[:1]), V, np.zeros_like(V[:1])])
    hv = np.einsum("yp,myrs,mys->mpr", g.Q, Hs, _slice_values(g, V), optimize=True)
    return (Vp[2:] - Vp[:-2]) / (2 * ds) + _slice_fueter(g, V) - hv


def floer_trajectory(p: FloerProblem, max_newton: int = 30, guess=None) -> Trajectory:
    """Newton-Krylov solve of the space-time boundary value problem.

    Each Newton step solves the linearized system with GMRES applied to the
    matrix-free linearization, preconditioned by a sparse LU factorization
    of the assembled block-tridiagonal Jacobian at the current iterate.
    """
    s = p.s
    g = p.grid
    if not np.allclose(p.f_minus, p.f_plus) and g.action(p.f_minus, p.H) <= g.action(p.f_plus, p.H):
        raise ValueError("need A_H(f-) > A_H(f+) for a downward trajectory")
    if guess is None:
        sig = 0.5 * (1 + np.tanh(s / p.width))
        U = p.f_minus[None] + sig[:, None, None] * (p.f_plus - p.f_minus)[None]
    else:
        U = np.array(guess, dtype=float)
    U[0], U[-1] = p.f_minus, p.f_plus
    if np.allclose(p.f_minus, p.f_plus):
        U[:] = p.f_minus
    shape = U[1:-1].shape
    n = int(np.prod(shape))

    def norm(R):
        return float(np.sqrt(np.sum(R**2) * p.ds / p.grid.npoints))

    R = _space_time_residual(p, U)
    res = norm(R)
    total_gmres = 0
    steps = 0
    while res > 1e-2 * p.tol and steps < max_newton:
        steps += 1
        lu = splu(_space_time_jacobian(p, U), permc_spec="NATURAL")
        M = LinearOperator((n, n), matvec=lambda v: lu.solve(np.asarray(v).ravel()))
        Hs = _slice_hessians(p, U[1:-1])
        A = LinearOperator((n, n), matvec=lambda v: _jv(p, U, np.asarray(v).reshape(shape), Hs).ravel())
        count = [0]

        def cb(_):
            count[0] += 1

        dx, info = gmres(A, -R.ravel(), M=M, rtol=1e-10, atol=0.0, restart=30, maxiter=5,
                         callback=cb, callback_type="pr_norm")
        total_gmres += count[0]
        dx = dx.reshape(shape)
        t = 1.0
        while t > 1e-4:
            Un = U.copy()
            Un[1:-1] += t * dx
            Rn = _space_time_residual(p, Un)
            if norm(Rn) < (1 - 1e-4 * t) * res or norm(Rn) < 1e-2 * p.tol:
                break
            t *= 0.5
        U, R, res = Un, Rn, norm(Rn)
    if res > p.tol:
        raise NoConvergence(f"space-time Newton stalled at residual {res:.3e}", U, res)
    return Trajectory(p, U, res, steps, total_gmres)


def action_profile(traj: Trajectory) -> np.ndarray:
    g, H = traj.problem.grid, traj.problem.H
    return np.array([g.action(C, H) for C in traj.u])


def action_is_monotone(traj: Trajectory, tol: float = 1e-10) -> bool:
    """A_H(u(s_i)) is non-increasing in s up to an absolute slack ``tol``."""
    return bool(np.all(np.diff(action_profile(traj)) <= tol))


def floer_energy_residual(traj: Trajectory) -> float:
    """|E(u) - (A_H(f-) - A_H(f+))| / max(1, E(u))."""
    p = traj.problem
    drop = p.grid.action(p.f_minus, p.H) - p.grid.action(p.f_plus, p.H)
    E = traj.energy()
    return abs(E - drop) / max(1.0, E)


def ode_oracle(H: HamiltonianSpec, x_mid, s_eval) -> np.ndarray:
    """y-independent reduction: x' = grad H(x) integrated from x(0) = x_mid."""
    s_eval = np.asarray(s_eval, dtype=float)
    y0 = np.zeros((1, 3))

    def rhs(_, x):
        return H.gradient(y0, x[None])[0]

    out = np.empty((len(s_eval), H.dim))
    pos = s_eval >= 0
    for mask, end in ((pos, s_eval.max()), (~pos, s_eval.min())):
        if not np.any(mask):
            continue
        ts = np.sort(s_eval[mask])
        if end < 0:
            ts = ts[::-1]
        sol = solve_ivp(rhs, (0.0, end), np.asarray(x_mid, dtype=float), t_eval=ts,
                        rtol=1e-12, atol=1e-14, method="DOP853")
        idx = np.flatnonzero(mask)
        order = np.argsort(s_eval[idx])
        if end < 0:
            order = order[::-1]
        out[idx[order]] = sol.y.T
    return out
