"""Exact 4x4 matrix algebra for the free Dirac operator.

UNITS
    Natural units throughout: c = m = hbar = 1. The rest-mass term is the
    matrix ``beta`` with eigenvalues +-1, so the essential spectrum of the
    free operator is (-inf, -1] u [1, inf) and "threshold" always means
    energy +1.

CONVENTIONS
    The 2x2 blocks are built from the Pauli-type triple

        s1 = [[1, 0], [0, -1]]
        s2 = [[0, 1], [1,  0]]
        s3 = [[0, -i], [i, 0]]

    which is a cyclic relabeling of the common textbook order. Every
    quantity computed downstream (spectra, norms, scaling exponents) is
    representation independent; fixing one labeling keeps stored reference
    data reproducible. ``alpha(l)`` is off-diagonal with ``s_l`` blocks,
    ``beta`` is diag(1, 1, -1, -1). The triple satisfies the Clifford
    relations  alpha_i alpha_j + alpha_j alpha_i = 2 delta_ij,
    alpha_i beta + beta alpha_i = 0, beta^2 = 1, all matrices Hermitian.

    The symbol of the free operator at momentum p is
    ``free_dirac_symbol(p) = sum_l p_l alpha_l + beta`` whose square is
    (|p|^2 + 1) I, the relativistic dispersion.

All matrices are small constant complex arrays; callers should treat them
as read-only (fresh copies are returned).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "sigma",
    "alpha",
    "beta",
    "identity4",
    "alpha_stack",
    "one_plus_beta",
    "free_dirac_symbol",
]

_SIGMA = np.array(
    [
        [[1, 0], [0, -1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
    ],
    dtype=np.complex128,
)

_ALPHA = np.zeros((3, 4, 4), dtype=np.complex128)
for _l in range(3):
    _ALPHA[_l, :2, 2:] = _SIGMA[_l]
    _ALPHA[_l, 2:, :2] = _SIGMA[_l]

_BETA = np.diag([1.0, 1.0, -1.0, -1.0]).astype(np.complex128)


def sigma(l: int) -> np.ndarray:
    """Pauli-type matrix, l in {1, 2, 3}."""
    return _SIGMA[l - 1].copy()


def alpha(l: int) -> np.ndarray:
    """Off-diagonal 4x4 Dirac matrix alpha_l, l in {1, 2, 3}."""
    return _ALPHA[l - 1].copy()


def beta() -> np.ndarray:
    """Mass matrix diag(1, 1, -1, -1)."""
    return _BETA.copy()


def identity4() -> np.ndarray:
    return np.eye(4, dtype=np.complex128)


def alpha_stack() -> np.ndarray:
    """All three alpha matrices as one (3, 4, 4) array."""
    return _ALPHA.copy()


def one_plus_beta() -> np.ndarray:
    """1 + beta = diag(2, 2, 0, 0); twice the upper-component projector."""
    return identity4() + _BETA


def free_dirac_symbol(p) -> np.ndarray:
    """Matrix symbol  sum_l p_l alpha_l + beta  at momentum p (3-vector)."""
    p = np.asarray(p, dtype=np.complex128)
    if p.shape != (3,):
        raise ValueError("momentum must be a 3-vector")
    return np.einsum("l,lij->ij", p, _ALPHA) + _BETA
