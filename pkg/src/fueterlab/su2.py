"""Spin-j angular momentum matrices and realification helpers."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

__all__ = ["spin_matrices", "su2_generators", "realify", "as_spin", "spin_label"]


def as_spin(j) -> Fraction:
    """Validate a spin value (0, 1/2, 1, ...) and return it as a Fraction."""
    jf = Fraction(j).limit_denominator(2)
    if jf < 0 or (2 * jf).denominator != 1 or abs(float(jf) - float(j)) > 1e-12:
        raise ValueError(f"spin must be a non-negative integer or half-integer, got {j!r}")
    return jf


def spin_label(j) -> str:
    jf = as_spin(j)
    return str(jf.numerator) if jf.denominator == 1 else f"{jf.numerator}/2"


def spin_matrices(j):
    """(Sx, Sy, Sz) for spin j in the basis m = j, j-1, ..., -j."""
    jf = float(as_spin(j))
    m = np.arange(jf, -jf - 1, -1)
    n = len(m)
    # S+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>
    sp = np.zeros((n, n))
    for a in range(1, n):
        sp[a - 1, a] = np.sqrt(jf * (jf + 1) - m[a] * (m[a] + 1))
    sx = 0.5 * (sp + sp.T)
    sy = -0.5j * (sp - sp.T)
    sz = np.diag(m).astype(complex)
    return sx.astype(complex), sy, sz


def su2_generators(j):
    """Matrices of the imaginary units i, j, k acting on spin-j as left translation.

    The unit e_a maps to -2i S_a, a Lie algebra homomorphism from Im H with the
    commutator bracket ([i, j] = 2k) into su(2j+1).
    """
    return np.stack([-2j * s for s in spin_matrices(j)])


def realify(H: np.ndarray) -> np.ndarray:
    """Real form [[Re H, -Im H], [Im H, Re H]] of a complex matrix."""
    return np.block([[H.real, -H.imag], [H.imag, H.real]])
