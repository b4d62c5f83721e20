"""Critical couplings, the threshold space N, and its classification.

PHYSICS SCOPE
    A coupling g is critical for a potential shape A when 1 - T^{gA}_1
    (threshold energy E = 1, i.e. k = 0) is singular on the support
    grid: the kernel N of that operator is the space of E = +1
    threshold states. Each basis state Phi carries a tail moment

        lambda(Phi) = int (1+beta) A(y) Phi(y) d^3y   (upper 2-spinor),

    the coefficient of the |x|^{-1} far-field term: lambda = 0 for every
    basis state means N consists of genuine bound states (decay |x|^{-2},
    square integrable); lambda != 0 means |x|^{-1} resonance tails. Mixed
    configurations are rejected, matching the dichotomy this laboratory
    measures.

CONVENTIONS
    Criticality is detected on sigma_min(1 - g T-hat), not on eigenvalues
    of T-hat: the object of interest is the null space, and sigma_min is
    robust for non-normal matrices. The operator is assembled once at
    unit coupling; the coupling scan reuses it, so each probe costs one
    LU factorization. Matrix norms in thresholds are 1-norms.

    gram_n[p, q] = <Phi_p, A, Phi_q>, gram_m[p, q] = <Phi_p, A, A Phi_q>;
    with Hermitian A these are the Gram matrices of N and of the span
    M = {A Phi} under the A-weighted pairing. Basis states are sup-norm
    normalized with a deterministic phase (largest component real
    positive), ordered by ascending singular value.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .algebra import one_plus_beta
from .potentials import FourPotential, Grid3, SpinorField, pseudo_inner
from .solver import (
    apply_kernel_rows,
    assemble_T,
    smallest_singular_value,
    _fold_rows,
)

__all__ = [
    "CriticalStructure",
    "Projectors",
    "find_critical_coupling",
    "lambda_of",
    "classify_lambda_bar",
    "decay_decomposition",
    "extend_to_grid",
    "make_projectors",
    "sigma_min_at",
]

_CRITICAL_REL = 1e-8
_SUBSPACE_FACTOR = 10.0
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _thread_count() -> int:
    env = os.environ.get("THRESHOLD_DIRAC_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass
class CriticalStructure:
    """Everything extracted at one critical coupling of one shape."""

    shape: FourPotential  # unit-coupling shape
    g_star: float
    basis: list  # of SpinorField on the support grid (dense off support = 0)
    lambda_values: list  # of (4,) complex arrays
    lambda_bar: int
    gram_n: np.ndarray
    gram_m: np.ndarray
    sigma_records: list = field(default_factory=list)  # (g, sigma_rel) pairs
    sigma_min: float = 0.0
    matrix_scale: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.basis)

    def critical_potential(self) -> FourPotential:
        return self.shape.rescaled(self.g_star)


def sigma_min_at(that: np.ndarray, g: float) -> tuple[float, float]:
    """(sigma_min, 1-norm scale) of 1 - g T-hat for a preassembled T-hat."""
    m = np.eye(that.shape[0], dtype=np.complex128) - g * that
    scale = float(np.linalg.norm(m, 1))
    return smallest_singular_value(m), scale


def find_critical_coupling(
    shape: FourPotential,
    bracket: tuple,
    n_scan: int = 24,
    g_tol: float = 1e-13,
    collapse_tol: float = 1e-6,
) -> CriticalStructure:
    """Locate the coupling in the bracket where 1 - T^{gA}_1 is singular.

    Coarse scan (concurrent) to find the sigma_min dip, golden-section
    refinement to solver precision, then one dense SVD at g* to extract
    the null space. Raises ValueError("not critical in range") when no
    scanned point dips toward singularity.
    """
    g_lo, g_hi = float(bracket[0]), float(bracket[1])
    if not g_lo < g_hi:
        raise ValueError("bracket must satisfy g_lo < g_hi")
    op = assemble_T(shape, 0.0)
    that = op.matrix
    records = []

    def sigma_rel(g):
        s, scale = sigma_min_at(that, g)
        rel = s / scale
        records.append((g, rel))
        return rel

    gs = np.linspace(g_lo, g_hi, n_scan)
    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        vals = list(pool.map(sigma_rel, gs))
    vals = np.array(vals)
    i = int(np.argmin(vals))
    if i == 0 or i == n_scan - 1:
        raise ValueError("not critical in range")
    # require an actual dip, not a flat valley of well-conditioned systems
    if vals[i] > 0.25 * min(vals[0], vals[-1]):
        raise ValueError("not critical in range")

    a, b = gs[i - 1], gs[i + 1]
    # golden-section: sigma_min is V-shaped (conical) at the crossing
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = sigma_rel(c), sigma_rel(d)
    while (b - a) > g_tol * max(1.0, abs(a), abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = sigma_rel(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = sigma_rel(d)
    g_star = 0.5 * (a + b)

    m = np.eye(that.shape[0], dtype=np.complex128) - g_star * that
    scale = float(np.linalg.norm(m, 1))
    svals, vh = _right_singular(m)
    sigma = float(svals[-1])
    records.append((g_star, sigma / scale))
    if sigma >= _CRITICAL_REL * scale:
        raise ValueError("not critical in range")

    cut = _SUBSPACE_FACTOR * _CRITICAL_REL * scale
    n_dim = int(np.sum(svals < cut))
    # right singular vectors are columns of V = Vh^dagger, hence conj rows
    basis_vecs = vh[-n_dim:][::-1].conj()  # ascending sigma first

    grid = shape.grid
    sup = op.support
    basis = []
    for vec in basis_vecs:
        rows = vec.reshape(-1, 4)
        full = np.zeros((grid.n_nodes, 4), dtype=np.complex128)
        full[sup] = rows
        f = SpinorField(grid, full)
        mag = np.abs(full)
        flat = int(np.argmax(mag))
        phase = full.reshape(-1)[flat]
        f = f.scaled(abs(phase) / (phase * f.sup_norm()))
        basis.append(f)

    A = shape.rescaled(g_star)
    lam = [lambda_of(f, A) for f in basis]
    gram_n = np.array(
        [[pseudo_inner(basis[p], A, basis[q]) for q in range(n_dim)] for p in range(n_dim)]
    )
    gram_m = np.array(
        [
            [pseudo_inner(basis[p], A, _apply_pot(A, basis[q])) for q in range(n_dim)]
            for p in range(n_dim)
        ]
    )
    crit = CriticalStructure(
        shape=shape,
        g_star=float(g_star),
        basis=basis,
        lambda_values=lam,
        lambda_bar=0,
        gram_n=gram_n,
        gram_m=gram_m,
        sigma_records=sorted(records),
        sigma_min=sigma,
        matrix_scale=scale,
    )
    crit.lambda_bar = classify_lambda_bar(crit, collapse_tol)
    return crit


def _right_singular(m: np.ndarray):
    svals, vh = np.linalg.svd(m, compute_uv=True)[1:]
    return svals, vh


def _apply_pot(A: FourPotential, f: SpinorField) -> SpinorField:
    return SpinorField(f.grid, _fold_rows(A.values, f.values))


def lambda_of(phi: SpinorField, A: FourPotential) -> np.ndarray:
    """Tail moment int (1+beta) A(y) Phi(y) d^3y; lower components exact 0."""
    if not phi.grid.same_layout(A.grid):
        raise ValueError("Phi must live on the potential's grid")
    af = _fold_rows(A.values, phi.values)
    moment = A.grid.weights @ af
    return one_plus_beta() @ moment


def classify_lambda_bar(crit: CriticalStructure, tol_rel: float = 1e-6) -> int:
    """0 when every basis tail moment vanishes, 1 when none does.

    The threshold separating "vanishes" from "does not" is
    tol_rel * |A|_L1 * sup|Phi|; a mixed verdict is an error, matching
    the dichotomy assumed throughout (all tails or none).
    """
    from .potentials import norms

    A = crit.critical_potential()
    l1 = norms(A)["l1"]
    small, large = [], []
    for phi, lam in zip(crit.basis, crit.lambda_values):
        scale = tol_rel * l1 * phi.sup_norm()
        (small if np.linalg.norm(lam) <= scale else large).append(lam)
    if small and large:
        raise ValueError(
            "mixed tail moments: configuration outside the pure lambda-bar classes"
        )
    return 0 if small else 1


def extend_to_grid(crit: CriticalStructure, phi: SpinorField, eval_grid: Grid3) -> SpinorField:
    """Extend a threshold state to an arbitrary grid via Phi = T^{g*A} Phi."""
    A = crit.critical_potential()
    sup = A.support_indices()
    vals = apply_kernel_rows(
        0.0, eval_grid.points, A, phi.values[sup], A.grid.spacing
    )
    return SpinorField(eval_grid, vals)


def decay_decomposition(
    phi_ext: SpinorField,
    A: FourPotential,
    lam: np.ndarray,
    support_radius: float | None = None,
    n_shells: int = 8,
) -> dict:
    """Split Phi = Phi_1 + Phi_2 and fit radial decay exponents.

    Phi_2(x) = -(4 pi |x|)^{-1} lambda(Phi) carries the whole |x|^{-1}
    tail; Phi_1 = Phi - Phi_2 decays at least as |x|^{-2}. Exponents are
    log-log fits of sup-over-shell beyond twice the support radius.
    """
    R = support_radius if support_radius is not None else A.radius
    grid = phi_ext.grid
    r = grid.radii()
    r_max = grid.half_width
    if r_max < 4.0 * R - 1e-12:
        raise ValueError("evaluation grid radius must reach 4x the support radius")
    edges = np.linspace(2.0 * R, r_max, n_shells + 1)
    if n_shells < 5:
        raise ValueError("need at least 5 radial shells beyond 2R")

    with np.errstate(divide="ignore", invalid="ignore"):
        phi2_vals = np.where(
            r[:, None] > 0, -lam[None, :] / (4.0 * np.pi * r[:, None]), 0.0
        )
    phi1_vals = phi_ext.values - phi2_vals

    def fit(values):
        mids, sups = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            mask = (r >= lo) & (r < hi)
            if not mask.any():
                continue
            sup = np.max(np.linalg.norm(values[mask], axis=1))
            if sup > 0:
                mids.append(0.5 * (lo + hi))
                sups.append(sup)
        if len(mids) < 5:
            raise ValueError("fewer than 5 usable radial shells beyond 2R")
        return float(np.polyfit(np.log(mids), np.log(sups), 1)[0])

    report = {
        "phi_1": SpinorField(grid, phi1_vals),
        "phi_2": SpinorField(grid, phi2_vals),
        "exponent_phi": fit(phi_ext.values),
        "exponent_phi1": fit(phi1_vals),
    }
    report["exponent_phi2"] = -1.0 if np.linalg.norm(lam) > 0 else None
    return report


# ---------------------------------------------------------------------------
# direct-sum projectors


@dataclass
class Projectors:
    """P_par/P_perp for the M-split (span{A Phi_q}) and the N-split."""

    A: FourPotential
    basis: list
    gram_n: np.ndarray
    gram_m: np.ndarray

    def _coeffs(self, gram: np.ndarray, f: SpinorField) -> np.ndarray:
        b = np.array([pseudo_inner(phi, self.A, f) for phi in self.basis])
        return np.linalg.solve(gram, b)

    def project(self, which: str, f: SpinorField) -> SpinorField:
        """which in {"M_par", "M_perp", "N_par", "N_perp"}."""
        if which.startswith("M"):
            gamma = self._coeffs(self.gram_m, f)
            par = np.zeros_like(f.values)
            for c, phi in zip(gamma, self.basis):
                par += c * _fold_rows(self.A.values, phi.values)
        elif which.startswith("N"):
            gamma = self._coeffs(self.gram_n, f)
            par = np.zeros_like(f.values)
            for c, phi in zip(gamma, self.basis):
                par += c * phi.values
        else:
            raise ValueError("unknown projector")
        if which.endswith("par"):
            return SpinorField(f.grid, par)
        if which.endswith("perp"):
            return SpinorField(f.grid, f.values - par)
        raise ValueError("unknown projector")


def make_projectors(crit: CriticalStructure) -> Projectors:
    sv = np.linalg.svd(crit.gram_n, compute_uv=False)
    if sv[-1] < 1e-12 * sv[0]:
        raise ValueError("singular gram matrix: class-C condition (c) violated")
    sv = np.linalg.svd(crit.gram_m, compute_uv=False)
    if sv[-1] < 1e-12 * sv[0]:
        raise ValueError("singular gram matrix: class-C condition (c) violated")
    return Projectors(
        crit.critical_potential(), crit.basis, crit.gram_n, crit.gram_m
    )
