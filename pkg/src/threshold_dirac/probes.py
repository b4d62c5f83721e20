"""Sweep engine measuring divergence laws near a critical potential.

PHYSICS SCOPE
    A critical potential A carries threshold states at the band edge
    E = 1.  Perturbing to A + mu B0 and moving the energy to
    E_k = sqrt(1 + k^2) makes the generalized eigenfunctions blow up
    along specific curves in the (mu, k^2) plane: resonance peaks near
    mu = -gamma_l k^2 for real k and bound-state crossings near
    mu = gamma_l kappa^2 for k = i kappa, with gamma_l the curvature
    spectrum from the forms module (one formula, k^2 = -kappa^2).  This
    module measures those laws: divergence of sup norms, localization of
    the blow-up inside the threshold span, bound-state tracks in the gap,
    inverse-operator norm bands, and the growth of k-derivatives.

MEASUREMENT CONVENTIONS
    Statements "norm <= C * bound" are probed two-sided: one constant is
    fitted (median ratio over unflagged records) and every record must
    then stay inside a declared band around the fit.  The norm of the
    span-parallel part is reported twice, as the sup norm of the
    projected field and as its gram-metric coefficient norm; fits use
    the sup norm and a flag records when the two verdicts differ.

    sup_norm of a sweep record is the maximum over the evaluation grid
    and the support nodes together, so the triangle inequality
    sup >= n_part - residual_part - 1 holds exactly (|chi| = 1 at every
    point by the free-spinor normalization).

UNITS
    hbar = c = m = 1; mu is an additive coupling shift along B0.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from threading import Semaphore

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .critical import CriticalStructure, _thread_count, make_projectors
from .forms import gamma_spectrum, taylor_form
from .potentials import FourPotential, Grid3, SpinorField, norms, pseudo_inner
from .solver import (
    FreeSolution,
    apply_kernel_rows,
    assemble_kernel_blocks,
    combine_potentials,
    contract_potential,
    default_eval_grid,
    free_spinor,
    smallest_singular_value,
    _fold_rows,
    _rcond_from_lu,
)

__all__ = [
    "SweepPlan",
    "SweepRecord",
    "SweepResult",
    "BoundStateRecord",
    "DerivativeBound",
    "resonance_prediction",
    "resonance_denominator",
    "pairing_inf",
    "resonance_sweep",
    "mu_peak",
    "boundstate_track",
    "default_probe_field",
    "inverse_bound_probe",
    "derivative_recursion",
    "derivative_alpha",
    "derivative_bound",
    "lambda1_probe",
]

_RESONANCE_RCOND = 1e-10
_CROSSING_REL = 1e-5
_REFINE_TRIGGER_REL = 0.2
_MAX_REFINES_PER_MU = 6


@dataclass
class SweepPlan:
    """One sweep campaign over (mu, k, j) cells around a critical structure."""

    crit: CriticalStructure
    B0: FourPotential
    mus: tuple
    ks: tuple
    js: tuple = (1, 2)
    khat: tuple = (0.0, 0.0, 1.0)
    eval_grid: Grid3 | None = None
    band: float = 10.0
    max_inflight: int = 2
    n_kappa: int = 400
    kappa_range: tuple = (1e-4, 0.9)
    bound_mode: str = "auto"  # auto | eigen | sigma-scan
    probes: tuple = ("sweep",)
    out_dir: str | None = None

    def __post_init__(self):
        self.mus = tuple(float(m) for m in self.mus)
        self.ks = tuple(float(k) for k in self.ks)
        self.js = tuple(int(j) for j in self.js)
        if not self.mus or not self.ks:
            raise ValueError("mu and k lists must be nonempty")
        if any(k <= 0 for k in self.ks):
            raise ValueError("real-k probes need k > 0")
        if not self.B0.grid.same_layout(self.crit.shape.grid):
            raise ValueError("perturbation must live on the shape grid")
        if self.bound_mode not in ("auto", "eigen", "sigma-scan"):
            raise ValueError("bound_mode must be auto, eigen or sigma-scan")


@dataclass(frozen=True)
class SweepRecord:
    mu: float
    k: float
    j: int
    sup_norm: float
    n_part_norm: float
    residual_part: float
    predicted_bound: float
    at_resonance: bool
    n_part_l2: float = 0.0  # kept out of the on-disk record


@dataclass(frozen=True)
class SweepResult:
    records: list
    fit_constant: float
    fit_constant_l2: float
    norm_verdict_differs: bool
    gammas: np.ndarray


@dataclass(frozen=True)
class BoundStateRecord:
    mu: float
    kappa: float
    kappa_sq: float
    E: float
    sigma_min: float

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("bound-state crossings need 0 < kappa < 1")


@dataclass(frozen=True)
class DerivativeBound:
    mu: float
    k: float
    alpha: float
    weighted_sup: dict  # m -> ||(1+|x|)^-m phi^(m)||_inf

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ValueError("alpha is 1 + nonnegative by definition")


# ---------------------------------------------------------------------------
# shared small pieces


def _metric_chol(gram: np.ndarray):
    """Cholesky factor of the definite gram metric (sign-normalized)."""
    sign = 1.0 if gram[0, 0].real >= 0 else -1.0
    return sla.cholesky(sign * gram, lower=True)


def _bhat_matrix(crit: CriticalStructure, B: FourPotential) -> np.ndarray:
    """gram_n-metric matrix of the span-projected perturbation B."""
    n = crit.dim
    W = np.empty((n, n), dtype=np.complex128)
    for p in range(n):
        for q in range(n):
            W[p, q] = pseudo_inner(crit.basis[p], B, crit.basis[q])
    return np.linalg.solve(crit.gram_n, W)


def resonance_denominator(
    crit: CriticalStructure, R: np.ndarray, B: FourPotential | None, k: float
) -> float:
    """inf over normalized span states of ||(P_N B + Rhat k^2) Psi|| + k^3.

    Norms are taken in the gram_n metric; B = None means the projected
    perturbation part is absent.
    """
    Rhat = np.linalg.solve(crit.gram_n, np.asarray(R, dtype=np.complex128))
    K = Rhat * k**2
    if B is not None:
        K = K + _bhat_matrix(crit, B)
    L = _metric_chol(crit.gram_n)
    Km = L.conj().T @ K @ np.linalg.inv(L.conj().T)
    return float(np.linalg.svd(Km, compute_uv=False)[-1] + k**3)


def pairing_inf(crit: CriticalStructure, B: FourPotential | None) -> float:
    """inf over gram-normalized span states of |<Psi, B, Psi>|."""
    if B is None:
        return 0.0
    L = _metric_chol(crit.gram_n)
    Linv = np.linalg.inv(L)
    n = crit.dim
    W = np.empty((n, n), dtype=np.complex128)
    for p in range(n):
        for q in range(n):
            W[p, q] = pseudo_inner(crit.basis[p], B, crit.basis[q])
    vals = np.linalg.eigvalsh(Linv @ W @ Linv.conj().T)
    return float(np.min(np.abs(vals)))


def resonance_prediction(mu: float, k: float, gammas: np.ndarray) -> float:
    """Unfitted divergence kernel k * sum_l (|mu + gamma_l k^2| + k^3)^-1."""
    dens = np.abs(mu + np.asarray(gammas) * k**2) + k**3
    return float(k * np.sum(1.0 / dens))


def _assemble_pair(k: complex, pts: np.ndarray, h: float, vals_a, vals_b=None):
    """T-hat matrices on one node set, one kernel pass for both potentials.

    The kernel blocks are contracted chunk by chunk so the (nt, ns, 4, 4)
    block array never exceeds the solver's standing memory budget.
    """
    n = len(pts)
    TA = np.empty((4 * n, 4 * n), dtype=np.complex128)
    TB = np.empty_like(TA) if vals_b is not None else None
    chunk = max(1, 800_000 // max(n, 1))
    for s in range(0, n, chunk):
        stop = min(s + chunk, n)
        blocks = assemble_kernel_blocks(k, pts[s:stop], pts, h)
        TA[4 * s : 4 * stop] = contract_potential(blocks, vals_a)
        if TB is not None:
            TB[4 * s : 4 * stop] = contract_potential(blocks, vals_b)
    return TA, TB


def _lu_with_flag(M: np.ndarray):
    anorm = float(np.linalg.norm(M, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu = sla.lu_factor(M)
        rcond = _rcond_from_lu(M, lu, anorm)
    flagged = bool(rcond < _RESONANCE_RCOND or not np.isfinite(rcond))
    return lu, rcond, flagged


def _solve_cell(M, lu, flagged, rhs):
    if flagged:
        x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        return x
    return sla.lu_solve(lu, rhs)


def _embed(grid: Grid3, sup: np.ndarray, vals: np.ndarray) -> SpinorField:
    dense = np.zeros((grid.n_nodes, 4), dtype=np.complex128)
    dense[sup] = vals
    return SpinorField(grid, dense)


def _extend_many(k: float, targets: np.ndarray, spts: np.ndarray, h: float, folded):
    """Kernel extension of many folded sources in one pass over targets.

    folded: (ncells, ns, 4) rows of (V f) on the shared source nodes.
    Each target chunk assembles its kernel blocks once and applies them
    to every cell, so a mu/j scan pays for one kernel pass per k.
    """
    folded = np.asarray(folded)
    out = np.empty((folded.shape[0], len(targets), 4), dtype=np.complex128)
    chunk = max(1, 800_000 // max(len(spts), 1))
    for s in range(0, len(targets), chunk):
        blocks = assemble_kernel_blocks(k, targets[s : s + chunk], spts, h)
        out[:, s : s + chunk] = np.einsum("tsij,csj->cti", blocks, folded)
    return out


# ---------------------------------------------------------------------------
# resonance sweep


def _sweep_gammas(plan: SweepPlan) -> np.ndarray:
    A = plan.crit.critical_potential()
    R = taylor_form(A, plan.crit, 2)
    return gamma_spectrum(plan.crit, plan.B0, R).gammas


def resonance_sweep(plan: SweepPlan) -> SweepResult:
    """Solve every (mu, k, j) cell, project onto the span, fit the law.

    The combined operator is assembled once per k at unit couplings and
    recombined per mu (the contraction is exactly linear in the
    potential), so a mu scan costs one LU per cell and one kernel pass
    per k.  Solver failures become flagged records, never exceptions.
    """
    crit = plan.crit
    A = crit.critical_potential()
    gammas = _sweep_gammas(plan)
    union = combine_potentials(A, plan.B0).support_indices()
    grid = A.grid
    pts = grid.points[union]
    h = grid.spacing
    eval_grid = plan.eval_grid or default_eval_grid(grid)
    proj = make_projectors(crit)
    gate = Semaphore(max(1, plan.max_inflight))

    def run_k(k: float) -> list:
        with gate:
            khat = np.asarray(plan.khat, dtype=np.float64)
            kvec = k * khat / np.linalg.norm(khat)
            TA, TB = _assemble_pair(k, pts, h, A.values[union], plan.B0.values[union])
            eye = np.eye(TA.shape[0], dtype=np.complex128)
            cells = []
            folded = []
            for mu in plan.mus:
                M = eye - TA - mu * TB
                lu, rcond, flagged = _lu_with_flag(M)
                vmu_rows = A.values[union] + mu * plan.B0.values[union]
                for j in plan.js:
                    chi = FreeSolution(j, tuple(kvec), free_spinor(j, kvec))
                    rhs = chi.values_at(pts).reshape(-1)
                    u = _solve_cell(M, lu, flagged, rhs).reshape(-1, 4)
                    cells.append((mu, j, flagged, chi, u))
                    folded.append(_fold_rows(vmu_rows, u))
            exts = _extend_many(k, eval_grid.points, pts, h, folded)
            out = []
            for (mu, j, flagged, chi, u), tail in zip(cells, exts):
                ext = chi.values_at(eval_grid.points) + tail
                sup_norm = max(
                    float(np.max(np.linalg.norm(ext, axis=1))),
                    float(np.max(np.linalg.norm(u, axis=1))),
                )
                phi = _embed(grid, union, u)
                npar = proj.project("N_par", phi)
                coeffs = proj._coeffs(crit.gram_n, phi)
                n_l2 = float(np.sqrt(abs(coeffs.conj() @ (crit.gram_n @ coeffs))))
                resid = phi.values[union] - npar.values[union] - chi.values_at(pts)
                out.append(
                    SweepRecord(
                        mu=mu,
                        k=k,
                        j=j,
                        sup_norm=sup_norm,
                        n_part_norm=npar.sup_norm(),
                        residual_part=float(np.max(np.linalg.norm(resid, axis=1))),
                        predicted_bound=resonance_prediction(mu, k, gammas),
                        at_resonance=flagged,
                        n_part_l2=n_l2,
                    )
                )
            return out

    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        per_k = list(pool.map(run_k, plan.ks))
    records = [r for chunk in per_k for r in chunk]

    clean = [r for r in records if not r.at_resonance and r.predicted_bound > 0]
    if clean:
        c_sup = float(np.median([r.sup_norm / r.predicted_bound for r in clean]))
        c_l2 = float(np.median([r.n_part_l2 / r.predicted_bound for r in clean]))
    else:
        c_sup = c_l2 = float("nan")

    def n_violations(const, value):
        bad = 0
        for r in clean:
            pred = const * r.predicted_bound
            v = value(r)
            if v > plan.band * pred or v < pred / plan.band:
                bad += 1
        return bad

    differs = n_violations(c_sup, lambda r: r.sup_norm) != n_violations(
        c_l2, lambda r: r.n_part_l2
    )
    records = [replace(r, predicted_bound=c_sup * r.predicted_bound) for r in records]
    return SweepResult(
        records=records,
        fit_constant=c_sup,
        fit_constant_l2=c_l2,
        norm_verdict_differs=differs,
        gammas=gammas,
    )


def mu_peak(
    crit: CriticalStructure,
    B0: FourPotential,
    k: float,
    bracket: tuple,
    j: int = 1,
    khat=(0.0, 0.0, 1.0),
    n_coarse: int = 12,
    tol: float = 1e-5,
) -> tuple:
    """Locate the mu maximizing the response at fixed k (coarse + golden).

    The objective is the solution sup norm over the support nodes; the
    divergent span part lives there, so the peak location matches the
    full-grid sup.  Assembles the operator pair once, so each mu costs
    one LU.  Returns (mu_peak, sup_at_peak).
    """
    A = crit.critical_potential()
    union = combine_potentials(A, B0).support_indices()
    pts = A.grid.points[union]
    khat = np.asarray(khat, dtype=np.float64)
    kvec = float(k) * khat / np.linalg.norm(khat)
    TA, TB = _assemble_pair(float(k), pts, A.grid.spacing, A.values[union], B0.values[union])
    eye = np.eye(TA.shape[0], dtype=np.complex128)
    chi_rhs = FreeSolution(j, tuple(kvec), free_spinor(j, kvec)).values_at(pts).reshape(-1)

    def sup_at(mu: float) -> float:
        M = eye - TA - mu * TB
        lu, rcond, flagged = _lu_with_flag(M)
        u = _solve_cell(M, lu, flagged, chi_rhs).reshape(-1, 4)
        return float(np.max(np.linalg.norm(u, axis=1)))

    mu_lo, mu_hi = float(bracket[0]), float(bracket[1])
    grid_mu = np.linspace(mu_lo, mu_hi, n_coarse)
    vals = np.array([sup_at(m) for m in grid_mu])
    i = int(np.argmax(vals))
    a = grid_mu[max(i - 1, 0)]
    b = grid_mu[min(i + 1, n_coarse - 1)]
    mu_best, neg = _golden_min(lambda m: -sup_at(m), a, b, tol * max(abs(mu_hi), 1.0))
    return float(mu_best), float(-neg)


# ---------------------------------------------------------------------------
# bound states in the gap


def _golden_min(f, a: float, b: float, tol: float):
    """Golden-section minimum of a scalar function on [a, b]."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - g * (b - a)
    x2 = a + g * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _proportional_coupling(crit: CriticalStructure, B0: FourPotential):
    """Scalar c with B0 = c * shape nodewise, or None when not proportional."""
    sv = crit.shape.values
    bv = B0.values
    i = np.unravel_index(int(np.argmax(np.abs(sv))), sv.shape)
    if sv[i] == 0:
        return None
    c = bv[i] / sv[i]
    if c == 0 or np.linalg.norm(bv - c * sv) > 1e-12 * max(np.linalg.norm(bv), 1e-300):
        return None
    if abs(c.imag) > 1e-14 * abs(c):
        return None
    return float(c.real)


def boundstate_track(plan: SweepPlan) -> list:
    """Locate bound-state crossings of 1 - T^{A + mu B0} at k = i kappa.

    Two modes, selected by plan.bound_mode:

    "eigen" (the default when B0 is proportional to the critical shape):
    per kappa, the eigenvalues nu of the unit-coupling operator near 1/g*
    give every crossing coupling at once via mu = (1/nu - g*)/c, so one
    coarse kappa scan serves all mu values; requested crossings are then
    refined by root finding on the branch curve and validated against the
    sigma_min criterion.

    "sigma-scan" (the fallback for general B0): scan a log-spaced kappa
    grid (one kernel pass per kappa serves every mu), refine each
    candidate local minimum of sigma_min by golden section, and accept
    when the refined singular value collapses.

    Either way, a mu of the wrong sign legitimately yields an empty
    list, and at mu = 0 the track sits at the kappa -> 0 boundary and is
    reported at the first grid point.
    """
    crit = plan.crit
    if crit.lambda_bar != 0:
        raise ValueError("bound-state tracking needs the lambda-free class")
    mode = plan.bound_mode
    if mode == "auto":
        mode = "eigen" if _proportional_coupling(crit, plan.B0) is not None else "sigma-scan"
    if mode == "eigen":
        c = _proportional_coupling(crit, plan.B0)
        if c is None:
            raise ValueError("eigen mode needs B0 proportional to the critical shape")
        return _track_eigen(plan, c)
    return _track_sigma_scan(plan)


def _track_eigen(plan: SweepPlan, c: float) -> list:
    crit = plan.crit
    shape = crit.shape
    sup = shape.support_indices()
    pts = shape.grid.points[sup]
    h = shape.grid.spacing
    vs = shape.values[sup]
    g_star = crit.g_star
    sigma0 = 1.0 / g_star
    kmin, kmax = plan.kappa_range
    n_curve = max(16, plan.n_kappa // 10)
    kappas = np.geomspace(kmin, kmax, n_curve)
    n4 = 4 * len(pts)
    n_eig = min(6, n4 - 2)
    v0 = np.ones(n4, dtype=np.complex128)

    def assemble(kappa: float) -> np.ndarray:
        T, _ = _assemble_pair(1j * kappa, pts, h, vs)
        return T

    def branch_mus(T: np.ndarray) -> np.ndarray:
        """All crossing shifts mu at this kappa, from eigenvalues near 1/g*."""
        lu = sla.lu_factor(T - sigma0 * np.eye(n4, dtype=np.complex128))
        op = spla.LinearOperator(
            (n4, n4), matvec=lambda x: sla.lu_solve(lu, x), dtype=np.complex128
        )
        w = spla.eigs(op, k=n_eig, which="LM", return_eigenvectors=False, v0=v0)
        nus = sigma0 + 1.0 / w
        nus = nus[np.abs(nus.imag) <= 1e-3 * np.abs(nus)]
        good = nus.real[np.abs(nus.real) > 1e-12]
        return np.sort((1.0 / good - g_star) / c)

    # ARPACK is not reentrant and one dense operator can be GB-sized at the
    # finest grids, so the curve is traced strictly serially.
    curve = [branch_mus(assemble(kp)) for kp in kappas]

    def nearest(mus: np.ndarray, mu: float) -> float:
        if len(mus) == 0:
            return float("inf")
        return float(mus[np.argmin(np.abs(mus - mu))] - mu)

    # validation threshold mirrors the sigma-scan acceptance
    def sigma_at(kappa: float, mu: float):
        T = assemble(kappa)
        M = np.eye(n4, dtype=np.complex128) - (g_star + mu * c) * T
        return smallest_singular_value(M), float(np.linalg.norm(M, 1))

    records = []
    for mu in plan.mus:
        if mu == 0.0:
            sig, scale = sigma_at(kappas[0], 0.0)
            if sig < _CROSSING_REL * scale:
                records.append(
                    BoundStateRecord(
                        mu=0.0,
                        kappa=float(kappas[0]),
                        kappa_sq=float(kappas[0] ** 2),
                        E=float(np.sqrt(1.0 - kappas[0] ** 2)),
                        sigma_min=float(sig),
                    )
                )
            continue
        dvals = [nearest(mus, mu) for mus in curve]
        found = []
        for i in range(len(kappas) - 1):
            d0, d1 = dvals[i], dvals[i + 1]
            if not (np.isfinite(d0) and np.isfinite(d1)) or d0 == 0.0:
                continue
            if d0 * d1 < 0.0:
                kap = brentq(
                    lambda kp: nearest(branch_mus(assemble(kp)), mu),
                    kappas[i],
                    kappas[i + 1],
                    xtol=1e-10,
                    rtol=1e-10,
                )
                if all(abs(kap - f) > 1e-6 * kap for f in found):
                    found.append(float(kap))
        for kap in found:
            sig, scale = sigma_at(kap, mu)
            if sig < _CROSSING_REL * scale:
                records.append(
                    BoundStateRecord(
                        mu=mu,
                        kappa=kap,
                        kappa_sq=kap * kap,
                        E=float(np.sqrt(1.0 - kap * kap)),
                        sigma_min=float(sig),
                    )
                )
    return records


def _track_sigma_scan(plan: SweepPlan) -> list:
    crit = plan.crit
    A = crit.critical_potential()
    union = combine_potentials(A, plan.B0).support_indices()
    pts = A.grid.points[union]
    h = A.grid.spacing
    va, vb = A.values[union], plan.B0.values[union]
    kmin, kmax = plan.kappa_range
    kappas = np.geomspace(kmin, kmax, plan.n_kappa)

    def sigma_of(kappa: float, mu: float) -> float:
        TA, TB = _assemble_pair(1j * kappa, pts, h, va, vb)
        M = np.eye(TA.shape[0], dtype=np.complex128) - TA - mu * TB
        return smallest_singular_value(M)

    def scan_col(kappa: float) -> list:
        TA, TB = _assemble_pair(1j * kappa, pts, h, va, vb)
        eye = np.eye(TA.shape[0], dtype=np.complex128)
        col = []
        for mu in plan.mus:
            M = eye - TA - mu * TB
            col.append((smallest_singular_value(M), float(np.linalg.norm(M, 1))))
        return col

    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        grid_vals = list(pool.map(scan_col, kappas))

    records = []
    for im, mu in enumerate(plan.mus):
        sig = np.array([grid_vals[i][im][0] for i in range(len(kappas))])
        scl = np.array([grid_vals[i][im][1] for i in range(len(kappas))])
        trigger = _REFINE_TRIGGER_REL * float(np.median(scl))
        accept = _CROSSING_REL * float(np.median(scl))
        candidates = []
        if sig[0] < sig[1] and sig[0] < trigger:
            candidates.append(0)
        for i in range(1, len(kappas) - 1):
            if sig[i] < sig[i - 1] and sig[i] <= sig[i + 1] and sig[i] < trigger:
                candidates.append(i)
        candidates = sorted(candidates, key=lambda i: sig[i])[:_MAX_REFINES_PER_MU]
        for i in sorted(candidates):
            if i == 0:
                kap, val = kappas[0], sig[0]
            else:
                kap, val = _golden_min(
                    lambda x: sigma_of(x, mu),
                    kappas[i - 1],
                    kappas[i + 1],
                    1e-7 * kappas[i],
                )
            if val < accept:
                records.append(
                    BoundStateRecord(
                        mu=mu,
                        kappa=float(kap),
                        kappa_sq=float(kap * kap),
                        E=float(np.sqrt(1.0 - kap * kap)),
                        sigma_min=float(val),
                    )
                )
    return records


# ---------------------------------------------------------------------------
# inverse-operator norm probe


def default_probe_field(crit: CriticalStructure) -> SpinorField:
    """Span-orthogonal probe field for the inverse-bound measurements.

    A fully symmetric probe (even envelope, upper components only) can
    decouple from the span through every order in k by angular
    selection, leaving nothing but roundoff to measure.  This default
    mixes all four components under an anisotropic envelope to break
    the degeneracy, then projects onto M_perp.
    """
    grid = crit.shape.grid
    pts = grid.points
    prof = np.exp(-2.0 * np.sum(pts**2, axis=1)) * (
        1.0 + 0.7 * pts[:, 0] + 0.4 * pts[:, 1] - 0.3 * pts[:, 2]
    )
    raw = SpinorField(grid, np.outer(prof, np.array([1.0, 0.3, 0.25 - 0.15j, -0.4])))
    return make_projectors(crit).project("M_perp", raw)


def inverse_bound_probe(
    crit: CriticalStructure,
    B: FourPotential | None,
    kvec,
    phi: SpinorField,
    m_perp: SpinorField,
) -> dict:
    """Measured norms of the four inverse-operator bounds at one (B, k).

    Solves (1 - T^{A+B}) u = A phi and (1 - T^{A+B}) v = m_perp on the
    union support and reports the span-parallel and span-perpendicular
    sup norms of both solutions together with the shared denominator
    and the perturbation norm factor.
    """
    A = crit.critical_potential()
    V = combine_potentials(A, B) if B is not None else A
    union = V.support_indices()
    grid = A.grid
    pts = grid.points[union]
    k = float(np.linalg.norm(np.asarray(kvec, dtype=np.float64)))
    TV, _ = _assemble_pair(k, pts, grid.spacing, V.values[union])
    M = np.eye(TV.shape[0], dtype=np.complex128) - TV
    lu, rcond, flagged = _lu_with_flag(M)

    rhs1 = _fold_rows(A.values[union], phi.values[union]).reshape(-1)
    rhs2 = m_perp.values[union].reshape(-1)
    u = _solve_cell(M, lu, flagged, rhs1).reshape(-1, 4)
    v = _solve_cell(M, lu, flagged, rhs2).reshape(-1, 4)

    proj = make_projectors(crit)
    R = taylor_form(A, crit, 2)
    bn = norms(B) if B is not None else {"l1": 0.0, "linf": 0.0}
    report = {
        "k": k,
        "rcond": rcond,
        "at_resonance": flagged,
        "denominator": resonance_denominator(crit, R, B, k),
        "b_l1": bn["l1"],
        "b_linf": bn["linf"],
    }
    for name, sol in (("aphi", u), ("mperp", v)):
        f = _embed(grid, union, sol)
        npar = proj.project("N_par", f)
        nperp = f.values[union] - npar.values[union]
        report[f"n_par_{name}"] = npar.sup_norm()
        report[f"n_perp_{name}"] = float(np.max(np.linalg.norm(nperp, axis=1)))
    return report


# ---------------------------------------------------------------------------
# k-derivatives of generalized eigenfunctions


def _free_derivatives(j: int, k: float, khat: np.ndarray, m: int, points: np.ndarray):
    """d^l/dk^l of chi = u_j(k) e^{i k khat.x} for l = 0..m at given points.

    The spinor factor is differentiated by tight central differences
    (the phase convention keeps u_j(k) smooth along a fixed direction);
    the phase factor is differentiated exactly.
    """
    d = 1e-6 * (1.0 + k)
    u0 = free_spinor(j, k * khat)
    up = free_spinor(j, (k + d) * khat)
    um = free_spinor(j, (k - d) * khat)
    du = (up - um) / (2.0 * d)
    ddu = (up - 2.0 * u0 + um) / d**2
    x = points @ khat
    phase = np.exp(1j * k * x)[:, None]
    out = [phase * u0[None, :]]
    if m >= 1:
        out.append(phase * (du[None, :] + 1j * x[:, None] * u0[None, :]))
    if m >= 2:
        out.append(
            phase
            * (
                ddu[None, :]
                + 2j * x[:, None] * du[None, :]
                - (x**2)[:, None] * u0[None, :]
            )
        )
    return out


def _weighted_sup(points: np.ndarray, values: np.ndarray, m: int) -> float:
    w = (1.0 + np.linalg.norm(points, axis=1)) ** (-m)
    return float(np.max(w * np.linalg.norm(values, axis=1)))


def derivative_recursion(
    A: FourPotential | None,
    B: FourPotential | None,
    j: int,
    kvec,
    m: int,
    eval_grid: Grid3 | None = None,
) -> dict:
    """phi^(m) = d^m/dk^m of the generalized eigenfunction, by recursion.

    Differentiating (1 - T) phi = chi in k gives
    (1 - T) phi^(m) = d^m chi + sum_{l=1..m} C(m,l) [d^l T] phi^(m-l),
    solved with one LU shared across orders; the derivative kernels are
    the closed forms the forms module uses, here at real k.  With no
    potential at all, phi^(m) = d^m chi exactly.  Returns the field, the
    weighted sup norms ||(1+|x|)^-l phi^(l)||_inf per order, and flags.
    """
    if m not in (1, 2):
        raise ValueError("derivative recursion implemented for m = 1, 2")
    kvec = np.asarray(kvec, dtype=np.float64)
    k = float(np.linalg.norm(kvec))
    if k <= 0:
        raise ValueError("need k > 0")
    khat = kvec / k
    if A is None and B is not None:
        A, B = B, None
    V = combine_potentials(A, B) if (A is not None and B is not None) else A

    if V is None or len(V.support_indices()) == 0:
        grid = eval_grid or (V.grid if V is not None else Grid3(2.0, 21))
        chis = _free_derivatives(j, k, khat, m, grid.points)
        orders = {l: _weighted_sup(grid.points, chis[l], l) for l in range(1, m + 1)}
        return {
            "phi_m": SpinorField(grid, chis[m]),
            "weighted_sup": orders[m],
            "orders": orders,
            "rcond": float("inf"),
            "at_resonance": False,
        }

    union = V.support_indices()
    pts = V.grid.points[union]
    h = V.grid.spacing
    eval_grid = eval_grid or default_eval_grid(V.grid)
    TV, _ = _assemble_pair(k, pts, h, V.values[union])
    M = np.eye(TV.shape[0], dtype=np.complex128) - TV
    lu, rcond, flagged = _lu_with_flag(M)

    chis_sup = _free_derivatives(j, k, khat, m, pts)
    phis = [_solve_cell(M, lu, flagged, chis_sup[0].reshape(-1)).reshape(-1, 4)]
    for order in range(1, m + 1):
        f = chis_sup[order].copy()
        for l in range(1, order + 1):
            dT = apply_kernel_rows(k, pts, V, phis[order - l], h, order=l)
            f += math.comb(order, l) * dT
        phis.append(_solve_cell(M, lu, flagged, f.reshape(-1)).reshape(-1, 4))

    chis_eval = _free_derivatives(j, k, khat, m, eval_grid.points)
    orders = {}
    phi_m_field = None
    for order in range(1, m + 1):
        ext = chis_eval[order].copy()
        for l in range(0, order + 1):
            dT = apply_kernel_rows(k, eval_grid.points, V, phis[order - l], h, order=l)
            ext += math.comb(order, l) * dT
        orders[order] = max(
            _weighted_sup(eval_grid.points, ext, order),
            _weighted_sup(pts, phis[order], order),
        )
        if order == m:
            phi_m_field = SpinorField(eval_grid, ext)

    return {
        "phi_m": phi_m_field,
        "weighted_sup": orders[m],
        "orders": orders,
        "rcond": rcond,
        "at_resonance": flagged,
    }


def derivative_alpha(
    crit: CriticalStructure, B: FourPotential | None, k: float
) -> float:
    """alpha = 1 + (k + |B|_1) / (span denominator at k), always >= 1."""
    A = crit.critical_potential()
    R = taylor_form(A, crit, 2)
    denom = resonance_denominator(crit, R, B, k)
    bn = norms(B)["l1"] if B is not None else 0.0
    return 1.0 + (k + bn) / denom


def derivative_bound(
    crit: CriticalStructure,
    B0: FourPotential,
    mu: float,
    kvec,
    m: int = 2,
    j: int = 1,
    eval_grid: Grid3 | None = None,
) -> DerivativeBound:
    """Measured weighted derivative norms plus the predicted growth factor."""
    A = crit.critical_potential()
    B = B0.rescaled(mu)
    k = float(np.linalg.norm(np.asarray(kvec, dtype=np.float64)))
    rec = derivative_recursion(A, B, j, kvec, m, eval_grid=eval_grid)
    return DerivativeBound(
        mu=float(mu),
        k=k,
        alpha=derivative_alpha(crit, B, k),
        weighted_sup=rec["orders"],
    )


# ---------------------------------------------------------------------------
# resonance-class (lambda-bar = 1) probe


def lambda1_probe(
    crit: CriticalStructure,
    B: FourPotential | None,
    ks,
    j: int = 1,
    khat=(0.0, 0.0, 1.0),
    eval_grid: Grid3 | None = None,
) -> list:
    """Records of the divergence law for the 1/r-tail class.

    For each k: solve at A (+ B if given), project onto the span, and
    record the sup norm, the span-part norms and the denominator
    inf |<Psi, B, Psi>| + k of the resonance-class bound.
    """
    if crit.lambda_bar != 1:
        raise ValueError("lambda1 probe needs a resonance-class structure")
    A = crit.critical_potential()
    V = combine_potentials(A, B) if B is not None else A
    union = V.support_indices()
    grid = A.grid
    pts = grid.points[union]
    h = grid.spacing
    eval_grid = eval_grid or default_eval_grid(grid)
    proj = make_projectors(crit)
    pinf = pairing_inf(crit, B)
    khat = np.asarray(khat, dtype=np.float64)
    khat = khat / np.linalg.norm(khat)

    out = []
    for k in ks:
        k = float(k)
        TV, _ = _assemble_pair(k, pts, h, V.values[union])
        M = np.eye(TV.shape[0], dtype=np.complex128) - TV
        lu, rcond, flagged = _lu_with_flag(M)
        chi = FreeSolution(j, tuple(k * khat), free_spinor(j, k * khat))
        u = _solve_cell(M, lu, flagged, chi.values_at(pts).reshape(-1)).reshape(-1, 4)
        ext = chi.values_at(eval_grid.points) + apply_kernel_rows(
            k, eval_grid.points, V, u, h
        )
        phi = _embed(grid, union, u)
        npar = proj.project("N_par", phi)
        resid = phi.values[union] - npar.values[union] - chi.values_at(pts)
        out.append(
            {
                "k": k,
                "sup_norm": max(
                    float(np.max(np.linalg.norm(ext, axis=1))),
                    float(np.max(np.linalg.norm(u, axis=1))),
                ),
                "n_part_norm": npar.sup_norm(),
                "residual_part": float(np.max(np.linalg.norm(resid, axis=1))),
                "denominator": pinf + k,
                "at_resonance": flagged,
            }
        )
    return out
