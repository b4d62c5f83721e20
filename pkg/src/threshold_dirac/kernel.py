"""Outgoing Green kernel of the free Dirac operator and its k-derivatives.

PHYSICS SCOPE
    For energy E = E_k = sqrt(k^2 + 1) on the physical sheet (Im k >= 0)
    the resolvent kernel of the free operator at displacement z != 0 is

        G_k(z) = (e^{ik|z|} / 4 pi) [ -(E_k I + beta)/|z|
                                      - (k/|z| + i/|z|^2) (alpha . zhat) ]

    with zhat = z/|z|. This is the outgoing branch: for real k > 0 it
    radiates, for k = i kappa (kappa > 0, energies inside the gap) it
    decays like e^{-kappa |z|}.

    The first three k-derivatives are implemented in closed form. Each
    derivative shares the structure

        d^m G = (e^{ik|z|} / 4 pi) [ cI_m I + cb_m beta
                                     + ca_m (alpha . zhat) ]

    with scalar radial profiles cI_m, cb_m, ca_m listed in _profiles.
    Two identities worth knowing (both covered by tests):

      * d_k G at k = 0 is the constant matrix -(i/4 pi)(1 + beta); all
        1/|z| terms cancel. This constant kernel is what turns the
        first-order perturbation of the integral operator into a pure
        moment of the potential-weighted state.
      * d^2_k G at k = 0 is Hermitian under z -> -z + dagger, and d^3_k G
        is anti-Hermitian; these give the symmetry of the second and
        third Taylor coefficient matrices downstream.

    The kernel is NOT regularized at z = 0: evaluation at zero
    displacement raises. Quadrature over a cell containing the
    singularity is handled by the equal-volume sphere rule
    (self_cell_integral), which integrates the kernel exactly over a ball
    of radius a = h (3/4pi)^{1/3} using the radial moments
    J_n(k, a) = int_0^a r^n e^{ikr} dr.

UNITS
    Natural units, threshold at E = 1 (see algebra module).
"""

from __future__ import annotations

import numpy as np

from .algebra import alpha_stack, beta, identity4

__all__ = [
    "energy",
    "green",
    "green_dk",
    "radial_moment",
    "self_cell_integral",
    "sphere_radius",
    "fd_reference",
]

_I4 = identity4()
_BETA = beta()
_ALPHA = alpha_stack()


def energy(k) -> complex:
    """E_k = sqrt(k^2 + 1), principal branch (correct for Im k >= 0)."""
    return complex(np.sqrt(complex(k) ** 2 + 1.0))


def _profiles(k: complex, r: np.ndarray, order: int):
    """Radial coefficient profiles (cI, cb, ca) for d^order G, order 0..3.

    The e^{ikr}/4pi prefactor is NOT included.
    """
    E = energy(k)
    if order == 0:
        cI = -E / r
        cb = -1.0 / r
        ca = -(k / r + 1j / r**2)
    elif order == 1:
        cI = -1j * E - k / (E * r)
        cb = -1j * np.ones_like(r)
        ca = -1j * k * np.ones_like(r)
    elif order == 2:
        cI = r * E - 2j * k / E - 1.0 / (r * E**3)
        cb = r.astype(np.complex128)
        ca = r * k - 1j
    elif order == 3:
        cI = 1j * r**2 * E + 3.0 * r * k / E - 3j / E**3 + 3.0 * k / (r * E**5)
        cb = 1j * r**2
        ca = 1j * r**2 * k + 2.0 * r
    else:
        raise ValueError("derivative order must be 0, 1, 2 or 3")
    return cI, cb, ca


def _evaluate(k: complex, disp: np.ndarray, order: int) -> np.ndarray:
    disp = np.asarray(disp, dtype=np.float64)
    single = disp.ndim == 1
    z = np.atleast_2d(disp)
    r = np.linalg.norm(z, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("kernel evaluated at zero displacement")
    zhat = z / r[..., None]
    cI, cb, ca = _profiles(k, r, order)
    phase = np.exp(1j * k * r) / (4.0 * np.pi)
    adotz = np.einsum("nl,lij->nij", zhat, _ALPHA)
    out = (
        (phase * cI)[:, None, None] * _I4
        + (phase * cb)[:, None, None] * _BETA
        + (phase * ca)[:, None, None] * adotz
    )
    return out[0] if single else out


def green(k, x) -> np.ndarray:
    """Outgoing kernel G_k at displacement(s) x; shape (..., 4, 4)."""
    return _evaluate(complex(k), x, 0)


def green_dk(k, x, order: int = 1) -> np.ndarray:
    """Closed-form d^order/dk^order of green, order in {1, 2, 3}."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    return _evaluate(complex(k), x, order)


def radial_moment(n: int, k, a: float) -> complex:
    """J_n(k, a) = int_0^a r^n e^{ikr} dr for integer n >= 0.

    Series for small |k| a (the recursion cancels catastrophically there),
    stable closed recursion otherwise.
    """
    k = complex(k)
    if n < 0:
        raise ValueError("n must be >= 0")
    x = k * a
    if abs(x) < 2.0:
        # J_n = sum_m (ik)^m a^{n+m+1} / (m! (n+m+1))
        total = 0.0 + 0.0j
        term = a ** (n + 1)  # (ik)^m a^{n+m+1} / m!
        for m in range(48):
            total += term / (n + m + 1)
            term *= 1j * k * a / (m + 1)
            if abs(term) < 1e-18 * max(abs(total), a ** (n + 1)):
                break
        return total
    e = np.exp(1j * x)
    J = (e - 1.0) / (1j * k)
    for p in range(1, n + 1):
        J = (a**p * e - p * J) / (1j * k)
    return complex(J)


def sphere_radius(h: float) -> float:
    """Radius of the ball with the volume of a grid cell of side h."""
    return h * (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)


def self_cell_integral(k, h: float, order: int = 0) -> np.ndarray:
    """Integral of d^order G over the equal-volume ball around z = 0.

    The alpha.zhat parts integrate to zero by parity; what remains are
    radial moments against the I and beta profiles. Used as the diagonal
    block of the quadrature (already includes the cell volume).
    """
    k = complex(k)
    a = sphere_radius(h)
    E = energy(k)
    J = [radial_moment(n, k, a) for n in range(5)]
    if order == 0:
        return -(E * _I4 + _BETA) * J[1]
    if order == 1:
        return -1j * (E * _I4 + _BETA) * J[2] - (k / E) * J[1] * _I4
    if order == 2:
        return (E * _I4 + _BETA) * J[3] - (2j * k / E) * J[2] * _I4 - J[1] / E**3 * _I4
    if order == 3:
        return (
            1j * (E * _I4 + _BETA) * J[4]
            + (3.0 * k / E) * J[3] * _I4
            - (3j / E**3) * J[2] * _I4
            + (3.0 * k / E**5) * J[1] * _I4
        )
    raise ValueError("order must be 0, 1, 2 or 3")


def fd_reference(k, x, order: int, step: float = 1e-2) -> np.ndarray:
    """Richardson-extrapolated finite-difference d^order G along real k.

    Independent of the closed forms in green_dk (uses only green). The
    stencil steps keep Im k fixed, which stays on the physical sheet.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")

    def diff(d: float) -> np.ndarray:
        if order == 1:
            return (green(k + d, x) - green(k - d, x)) / (2.0 * d)
        if order == 2:
            return (green(k + d, x) - 2.0 * green(k, x) + green(k - d, x)) / d**2
        return (
            green(k + 2 * d, x)
            - 2.0 * green(k + d, x)
            + 2.0 * green(k - d, x)
            - green(k - 2 * d, x)
        ) / (2.0 * d**3)

    coarse = diff(step)
    fine = diff(step / 2.0)
    return (4.0 * fine - coarse) / 3.0
