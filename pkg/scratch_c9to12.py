import time

import numpy as np

from threshold_dirac.potentials import Grid3, SpinorField, build_potential
from threshold_dirac.critical import find_critical_coupling, make_projectors
from threshold_dirac.solver import solve_generalized
from threshold_dirac.probes import (
    SweepPlan,
    boundstate_track,
    derivative_alpha,
    derivative_recursion,
    inverse_bound_probe,
    resonance_sweep,
)

t0 = time.time()
grid = Grid3(1.0, 9)
shape = build_potential(grid, "spherical-well", 1.0, 1.0)
crit = find_critical_coupling(shape, (5.0, 7.0))
B0 = build_potential(grid, "spherical-well", 1.0, 1.0)
A = crit.critical_potential()
eg = Grid3(2.0, 11)
print(f"[{time.time()-t0:6.1f}s] crit g*={crit.g_star:.6f}", flush=True)

# ---- criterion 9 clause 1: mu=0, k in [0.02, 0.2], slope of sup vs k
ks = tuple(np.geomspace(0.02, 0.2, 7))
plan = SweepPlan(crit=crit, B0=B0, mus=(0.0,), ks=ks, js=(1, 2), eval_grid=eg)
res = resonance_sweep(plan)
g1 = res.gammas[0]
sups = {}
for r in res.records:
    sups.setdefault(r.k, []).append(r.sup_norm)
kk = sorted(sups)
sup_k = [max(sups[k]) for k in kk]
slope0 = np.polyfit(np.log(kk), np.log(sup_k), 1)[0]
print(f"[{time.time()-t0:6.1f}s] mu=0 slope={slope0:.3f}  sups={np.round(sup_k,2)}", flush=True)

# companion: on-curve mu = -gamma1 k^2
mus_curve = tuple(-g1 * k**2 for k in ks)
recs = []
for mu, k in zip(mus_curve, ks):
    p = SweepPlan(crit=crit, B0=B0, mus=(mu,), ks=(k,), js=(1, 2), eval_grid=eg)
    r = resonance_sweep(p)
    recs.append(max(x.sup_norm for x in r.records))
    flagged = any(x.at_resonance for x in r.records)
    if flagged:
        print(f"  (flagged at k={k:.3f})", flush=True)
slope_curve = np.polyfit(np.log(ks), np.log(recs), 1)[0]
print(f"[{time.time()-t0:6.1f}s] on-curve slope={slope_curve:.3f}  sups={np.round(recs,1)}", flush=True)

# ---- criterion 9 clauses 2+3: k=0.05 mu-scan, peak/spike/residual
k0 = 0.05
mu_star = -g1 * k0**2
mus_scan = tuple(np.linspace(0.2 * mu_star, 2.2 * mu_star, 11))
p2 = SweepPlan(crit=crit, B0=B0, mus=mus_scan, ks=(k0,), js=(1,), eval_grid=eg)
r2 = resonance_sweep(p2)
sup_arr = np.array([r.sup_norm for r in r2.records])
npar_arr = np.array([r.n_part_norm for r in r2.records])
res_arr = np.array([r.residual_part for r in r2.records])
i_pk = int(np.argmax(sup_arr))
print(
    f"[{time.time()-t0:6.1f}s] k={k0}: peak mu={mus_scan[i_pk]:.6f} pred={mu_star:.6f} "
    f"off={abs(mus_scan[i_pk]-mu_star)/mu_star:.1%}",
    flush=True,
)
print(f"  npar peak/median = {npar_arr.max()/np.median(npar_arr):.1f} (want >=10)")
print(f"  resid max/median = {res_arr.max()/np.median(res_arr):.2f} (want <=5)")
print(f"  npar={np.round(npar_arr,1)}")
print(f"  resid={np.round(res_arr,3)}", flush=True)

# ---- criterion 10: bound line fit
mus_b = (-0.002, -0.004, -0.007, -0.011, -0.016)
p3 = SweepPlan(crit=crit, B0=B0, mus=mus_b, ks=(0.1,), n_kappa=50, kappa_range=(0.02, 0.2))
bs = boundstate_track(p3)
print(f"[{time.time()-t0:6.1f}s] bound records: {len(bs)}", flush=True)
for b in bs:
    print(f"  mu={b.mu:+.4f} kappa={b.kappa:.5f} k2={b.kappa_sq:.6f} sig={b.sigma_min:.2e}")
k2 = np.array([b.kappa_sq for b in bs])
mu_arr = np.array([b.mu for b in bs])
s_fit = float(np.sum(mu_arr * k2) / np.sum(k2 * k2))
print(f"  through-origin slope={s_fit:.4f} gamma1={g1:.4f} relerr={abs(s_fit-g1)/abs(g1):.2%}", flush=True)
p4 = SweepPlan(crit=crit, B0=B0, mus=(0.004, 0.016), ks=(0.1,), n_kappa=50, kappa_range=(0.02, 0.2))
bs_wrong = boundstate_track(p4)
print(f"  wrong-sign records: {len(bs_wrong)} (want 0)", flush=True)

# ---- criterion 11: inverse bounds
gauss = np.exp(-2.0 * np.sum(grid.points**2, axis=1))
mvals = np.zeros((grid.n_nodes, 4), dtype=np.complex128)
mvals[:, 0] = gauss
mvals[:, 1] = 0.5 * gauss
proj = make_projectors(crit)
m_perp = proj.project("M_perp", SpinorField(grid, mvals))
phi0 = crit.basis[0]

cells = [(mu, k) for mu in (0.08, 0.2) for k in (0.1, 0.2, 0.4)]
v4 = []
for mu, k in cells:
    rep = inverse_bound_probe(crit, B0.rescaled(mu), (0, 0, k), phi0, m_perp)
    v4.append(rep["n_perp_mperp"])
    print(f"  mu={mu:.2f} k={k:.1f}: par_aphi={rep['n_par_aphi']:.3f} perp_aphi={rep['n_perp_aphi']:.3f} "
          f"par_mperp={rep['n_par_mperp']:.4f} perp_mperp={rep['n_perp_mperp']:.4f} D={rep['denominator']:.4f}")
v4 = np.array(v4)
print(f"[{time.time()-t0:6.1f}s] viertensa band max/median={v4.max()/np.median(v4):.2f} (want <=5)", flush=True)

ks_d = (0.05, 0.1, 0.2, 0.4)
par_m = []
for k in ks_d:
    rep = inverse_bound_probe(crit, B0.rescaled(0.2), (0, 0, k), phi0, m_perp)
    par_m.append(rep["n_par_mperp"])
slope_d = np.polyfit(np.log(ks_d), np.log(par_m), 1)[0]
print(f"[{time.time()-t0:6.1f}s] drittensa slope={slope_d:.3f} vals={np.round(par_m,5)} (want 2+-0.3)", flush=True)

rep0 = inverse_bound_probe(crit, None, (0, 0, 0.5), phi0, m_perp)
print(f"  B=0 k=0.5: finite={all(np.isfinite([rep0['n_par_aphi'], rep0['n_perp_aphi'], rep0['n_par_mperp'], rep0['n_perp_mperp']]))} flag={rep0['at_resonance']}", flush=True)

# ---- criterion 12: FD oracle m=1 + band
B = B0.rescaled(0.1)
kv = (0.0, 0.0, 0.25)
rec = derivative_recursion(A, B, 1, kv, 1, eval_grid=eg)
d = 1e-3
pp, _ = solve_generalized(A, B, 1, (0, 0, 0.25 + d), eval_grid=eg)
pm, _ = solve_generalized(A, B, 1, (0, 0, 0.25 - d), eval_grid=eg)
fd = (pp.values - pm.values) / (2 * d)
wt = 1.0 / (1.0 + np.linalg.norm(eg.points, axis=1))
diff = np.max(wt * np.linalg.norm(rec["phi_m"].values - fd, axis=1))
ref = np.max(wt * np.linalg.norm(fd, axis=1))
print(f"[{time.time()-t0:6.1f}s] m=1 FD weighted rel err = {diff/ref:.2e} (want <=1e-3)", flush=True)

ratios = {1: [], 2: []}
for mu in (0.05, 0.15):
    Bmu = B0.rescaled(mu)
    for k in (0.1, 0.2, 0.4):
        r2b = derivative_recursion(A, Bmu, 1, (0, 0, k), 2, eval_grid=eg)
        al = derivative_alpha(crit, Bmu, k)
        for m in (1, 2):
            pred = k ** (-m) + al ** (m + 1)
            ratios[m].append(r2b["orders"][m] / pred)
        print(f"  mu={mu:.2f} k={k:.1f}: w1={r2b['orders'][1]:.3f} w2={r2b['orders'][2]:.3f} alpha={al:.3f}")
for m in (1, 2):
    arr = np.array(ratios[m])
    print(f"[{time.time()-t0:6.1f}s] m={m} band max/min over median: "
          f"{arr.max()/np.median(arr):.2f}, {np.median(arr)/arr.min():.2f} (want <=10)", flush=True)
