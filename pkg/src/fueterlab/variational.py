"""Quadrature checks of the energy identity, the action functionals and the
S^1 x S^2 isoperimetric argument, plus the regular-frame Rayleigh constant.

All integrals are evaluated with product rules that are exact for the
band-limited integrands involved, so residuals measure round-off only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldExpansion, TruncationError, identity_field_s3
from .frames import (
    PRODUCT_S1S2,
    SPHERE3,
    TORUS3,
    FrameSpec,
    volume_density,
)
from .quadrature import QuadratureRule, rule_for, s1s2_rule
from .quaternion import J_MATRICES, omega
from .spectral import block_labels, block_parts

__all__ = [
    "ActionValues",
    "UnboundedRatio",
    "FourierLoop",
    "required_degree",
    "field_rule",
    "energy_terms",
    "energy_identity_residual",
    "action_value",
    "isoperimetric_check",
    "extremal_loop",
    "s1s2_terms",
    "s1s2_identity_residual",
    "regular_estimate_constant",
    "sharp_block_ratio",
    "RatioReport",
]


class UnboundedRatio(ValueError):
    """The Rayleigh ratio is unbounded: the frame has a nonconstant kernel element."""

    def __init__(self, msg, witness=None, label=None):
        super().__init__(msg)
        self.witness = witness
        self.label = label


def required_degree(g: FieldExpansion):
    """Quadrature degree needed for quadratic integrands in g and its derivatives."""
    if g.manifold == TORUS3:
        return 2 * g.truncation[0]
    if g.manifold == SPHERE3:
        return 2 * g.truncation[0] + 1
    L, M = g.truncation
    return (2 * M + 1, 2 * L + 2)


def field_rule(g: FieldExpansion, degree=None) -> QuadratureRule:
    need = required_degree(g)
    if degree is None:
        degree = need
    if np.any(np.atleast_1d(degree) < np.atleast_1d(need)):
        raise TruncationError(f"quadrature degree {degree} below the needed {need}")
    if g.manifold == PRODUCT_S1S2:
        dt, ds = np.broadcast_to(np.atleast_1d(degree), (2,))
        return s1s2_rule(int(dt), int(ds))
    return rule_for(g.manifold, int(degree))


def _derivatives(f: FrameSpec, g: FieldExpansion, pts):
    return np.stack([g.derivative_values(f, i, pts) for i in range(3)])  # (3, npts, n, 4)


def _fueter(D):
    return sum(D[a] @ J_MATRICES[a].T for a in range(3))


def _pullback(D):
    """sum over cyclic (i, j, k) of omega_i(d_j g, d_k g), summed over components."""
    out = 0.0
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        out = out + omega(i + 1, D[j], D[k]).sum(axis=-1)
    return out


def energy_terms(f: FrameSpec, g: FieldExpansion, degree=None) -> dict:
    """Integrals entering the energy identity.

    ``dg2``: (1/2) int |dg|^2 with |dg|^2 = sum_i |d_{v_i} g|^2
    ``fueter2``: (1/2) int |d_v g|^2
    ``form``: sum_i int alpha_i ^ g^* omega_i, the 3-form integrand being
    evaluated on (v_1, v_2, v_3) and divided by the volume density.
    """
    rule = field_rule(g, degree)
    pts = rule.nodes
    D = _derivatives(f, g, pts)
    lam = volume_density(f, pts)
    dg2 = 0.5 * rule.integrate(np.sum(D**2, axis=(0, 2, 3)))
    fueter2 = 0.5 * rule.integrate(np.sum(_fueter(D) ** 2, axis=(1, 2)))
    form = rule.integrate(_pullback(D) / lam)
    return {"dg2": float(dg2), "fueter2": float(fueter2), "form": float(form)}


def energy_identity_residual(f: FrameSpec, g: FieldExpansion, degree=None) -> float:
    """|(1/2) int |dg|^2 - (1/2) int |d_v g|^2 + sum_i int alpha_i ^ g^* omega_i|.

    The pointwise identity behind it integrates against dvol, so for frames
    with nonconstant volume density the form term differs; all catalog frames
    are normal.
    """
    t = energy_terms(f, g, degree)
    return abs(t["dg2"] - t["fueter2"] + t["form"])


@dataclass(frozen=True)
class ActionValues:
    quadratic: float
    beta_form: float | None

    @property
    def discrepancy(self) -> float | None:
        if self.beta_form is None:
            return None
        return abs(self.quadratic - self.beta_form)


def _beta_on_frame(f: FrameSpec) -> np.ndarray:
    """B[i, a] = beta_i(v_a) for the invariant S^3 frames.

    With d beta_i = iota(v_i) dvol one may take beta_i(X) = <u_i y, X> / 2,
    which is constant on the frame: beta_i(v_a) = u_i . u_a / 2.
    """
    return 0.5 * f.U.T @ f.U


def action_value(f: FrameSpec, g: FieldExpansion, degree=None) -> ActionValues:
    """Action (1/2) int <g, d_v g> and, on S^3, -sum_i int beta_i ^ g^* omega_i."""
    rule = field_rule(g, degree)
    pts = rule.nodes
    D = _derivatives(f, g, pts)
    vals = g.evaluate(pts)
    quad = 0.5 * rule.integrate(np.sum(vals * _fueter(D), axis=(1, 2)))
    if f.manifold != SPHERE3:
        return ActionValues(float(quad), None)
    B = _beta_on_frame(f)
    lam = volume_density(f, pts)
    dens = 0.0
    for i in range(3):
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            dens = dens + B[i, a] * omega(i + 1, D[b], D[c]).sum(axis=-1)
    beta = -rule.integrate(dens / lam)
    return ActionValues(float(quad), float(beta))


# ------------------------------------------------------------- S^1 x S^2


@dataclass(frozen=True)
class FourierLoop:
    """theta -> c0 + sum_m cos(m theta) a_m + sin(m theta) b_m in H^n.

    ``cos`` and ``sin`` have shape (K, n, 4) for modes m = 1..K.
    """

    c0: np.ndarray
    cos: np.ndarray
    sin: np.ndarray

    @classmethod
    def random(cls, degree: int, rng, n: int = 1) -> "FourierLoop":
        return cls(
            rng.standard_normal((n, 4)),
            rng.standard_normal((degree, n, 4)),
            rng.standard_normal((degree, n, 4)),
        )

    @property
    def degree(self) -> int:
        return len(self.cos)

    def _eval(self, theta, deriv: bool):
        theta = np.asarray(theta, dtype=float)
        m = np.arange(1, self.degree + 1)
        C, S = np.cos(np.outer(theta, m)), np.sin(np.outer(theta, m))
        if deriv:
            return np.einsum("tm,mnr->tnr", -S * m, self.cos) + np.einsum("tm,mnr->tnr", C * m, self.sin)
        base = np.broadcast_to(np.asarray(self.c0, dtype=float), (len(theta),) + np.shape(self.c0))
        return base + np.einsum("tm,mnr->tnr", C, self.cos) + np.einsum("tm,mnr->tnr", S, self.sin)

    def __call__(self, theta):
        return self._eval(np.atleast_1d(theta), False)

    def derivative(self, theta):
        return self._eval(np.atleast_1d(theta), True)


def extremal_loop(y, q=(1.0, 0.0, 0.0, 0.0)) -> FourierLoop:
    """f(theta) = cos(theta) q - sin(theta) J_y q, which attains equality."""
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    Jy = np.einsum("a,apq->pq", y, J_MATRICES)
    return FourierLoop(
        np.zeros((1, 4)), q.reshape(1, 1, 4), -(Jy @ q).reshape(1, 1, 4)
    )


def _omega_y(y, u, v):
    return sum(y[a] * omega(a + 1, u, v) for a in range(3))


def isoperimetric_check(y, loop: FourierLoop):
    """Both sides of (1/2) int omega_y(f', f) dtheta <= (1/2) int |f'|^2 dtheta."""
    y = np.asarray(y, dtype=float)
    if abs(np.linalg.norm(y) - 1) > 1e-12:
        raise ValueError("y must lie on the unit sphere")
    n = 2 * loop.degree + 2
    th = 2 * np.pi * np.arange(n) / n
    f, df = loop(th), loop.derivative(th)
    w = 2 * np.pi / n
    lhs = 0.5 * w * np.sum(_omega_y(y, df, f))
    rhs = 0.5 * w * np.sum(df**2)
    return float(lhs), float(rhs)


def s1s2_terms(g: FieldExpansion, degree=None) -> dict:
    """Integrals in the S^1 x S^2 form of the energy identity.

    ``ahat`` is the double integral (1/2) int_{S^2} int_0^{2 pi}
    omega_y(d_theta g, g) dtheta dvol_{S^2}.
    """
    from .frames import product_s1s2

    if g.manifold != PRODUCT_S1S2:
        raise ValueError("field must live on S1xS2")
    f = product_s1s2()
    rule = field_rule(g, degree)
    pts = rule.nodes
    D = _derivatives(f, g, pts)
    vals = g.evaluate(pts)
    Dv = _fueter(D)
    dth = g.theta_derivative().evaluate(pts)
    y = pts[:, 1:]
    om = sum(y[:, a] * omega(a + 1, dth, vals).sum(axis=-1) for a in range(3))
    return {
        "dg2": float(0.5 * rule.integrate(np.sum(D**2, axis=(0, 2, 3)))),
        "fueter2": float(0.5 * rule.integrate(np.sum(Dv**2, axis=(1, 2)))),
        "action": float(0.5 * rule.integrate(np.sum(vals * Dv, axis=(1, 2)))),
        "ahat": float(0.5 * rule.integrate(om)),
        "theta2": float(0.5 * rule.integrate(np.sum(dth**2, axis=(1, 2)))),
    }


def s1s2_identity_residual(g: FieldExpansion, degree=None) -> float:
    t = s1s2_terms(g, degree)
    return abs(t["dg2"] - t["fueter2"] - t["action"] - t["ahat"])


# ---------------------------------------------------- Rayleigh constant


def _rayleigh_block(f: FrameSpec, label):
    """Largest ratio (-L) / D^2 on one block, or an unbounded witness."""
    D, Lv, _ = block_parts(f, label)
    A = -Lv
    B = D @ D
    wB, VB = np.linalg.eigh(B)
    scale = max(1.0, float(np.max(np.abs(wB))))
    null = wB <= 1e-10 * scale
    if np.any(null):
        Z = VB[:, null]
        energy = np.linalg.eigvalsh(Z.T @ A @ Z)
        if np.max(energy) > 1e-10 * max(1.0, float(np.max(np.abs(A)))):
            wA, VA = np.linalg.eigh(Z.T @ A @ Z)
            raise UnboundedRatio(
                f"kernel element with nonzero energy in block {label}",
                witness=Z @ VA[:, -1],
                label=label,
            )
    keep = ~null
    Vk = VB[:, keep] / np.sqrt(wB[keep])
    return float(np.max(np.linalg.eigvalsh(Vk.T @ A @ Vk)))


def sharp_block_ratio(f: FrameSpec, cutoff=None) -> tuple[float, object]:
    """max over nonconstant blocks of the generalized Rayleigh quotient."""
    best, arg = -np.inf, None
    for label in block_labels(f, cutoff):
        if f.manifold == TORUS3 and tuple(label) == (0, 0, 0):
            continue
        if f.manifold == SPHERE3 and label == 0:
            continue
        r = _rayleigh_block(f, label)
        if r > best:
            best, arg = r, label
    return best, arg


@dataclass(frozen=True)
class RatioReport:
    empirical: float
    sharp: float
    sharp_block: object
    witness_ratios: tuple = ()


def regular_estimate_constant(
    f: FrameSpec, sample_size: int = 20, seed: int = 0, cutoff=None, truncation=None
) -> RatioReport:
    """Empirical and sharp constants c in int |dg|^2 <= c int |d_v g|^2.

    The empirical value maximises the ratio over random mean-zero fields.
    The sharp value is the largest generalized eigenvalue over the blocks up
    to ``cutoff``.  A singular frame raises UnboundedRatio with a witness.
    """
    from .fields import project_mean_zero, random_field

    if f.manifold == PRODUCT_S1S2:
        raise ValueError("use the Galerkin spectrum for S1xS2")
    sharp, label = sharp_block_ratio(f, cutoff if cutoff is not None else (2 if f.manifold == TORUS3 else 3))
    rng = np.random.default_rng(seed)
    if truncation is None:
        truncation = (2,) if f.manifold == TORUS3 else (3,)
    best = 0.0
    for _ in range(sample_size):
        g = project_mean_zero(random_field(f.manifold, truncation, rng))
        t = energy_terms(f, g)
        best = max(best, t["dg2"] / t["fueter2"])
    witnesses = ()
    if f.manifold == SPHERE3:
        t = energy_terms(f, identity_field_s3())
        if t["fueter2"] > 0:
            witnesses = (t["dg2"] / t["fueter2"],)
    return RatioReport(best, sharp, label, witnesses)

