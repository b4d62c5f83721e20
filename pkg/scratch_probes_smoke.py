import time

import numpy as np

from threshold_dirac.potentials import Grid3, build_potential
from threshold_dirac.critical import find_critical_coupling
from threshold_dirac.probes import (
    SweepPlan,
    boundstate_track,
    derivative_recursion,
    lambda1_probe,
    resonance_sweep,
    resonance_prediction,
)

t0 = time.time()
grid = Grid3(1.0, 9)
shape = build_potential(grid, "spherical-well", 1.0, 1.0)
crit_b = find_critical_coupling(shape, (5.0, 7.0))
print(f"[{time.time()-t0:6.1f}s] bound-class g*={crit_b.g_star:.6f} dim={crit_b.dim} lbar={crit_b.lambda_bar}")

B0 = build_potential(grid, "spherical-well", 1.0, 1.0)

# --- sweep smoke: 2 mus x 2 ks x 1 j
plan = SweepPlan(
    crit=crit_b, B0=B0,
    mus=(0.05, 0.11), ks=(0.2, 0.3), js=(1,),
    eval_grid=Grid3(2.0, 11),
)
res = resonance_sweep(plan)
print(f"[{time.time()-t0:6.1f}s] sweep gammas={res.gammas} fitC={res.fit_constant:.4g} fitC_l2={res.fit_constant_l2:.4g} differs={res.norm_verdict_differs}")
for r in res.records:
    tri = r.sup_norm - (r.n_part_norm - r.residual_part - 1.0)
    print(f"  mu={r.mu:+.3f} k={r.k:.2f} j={r.j} sup={r.sup_norm:9.3f} npar={r.n_part_norm:9.3f} "
          f"resid={r.residual_part:7.3f} pred={r.predicted_bound:9.3f} flag={r.at_resonance} tri={tri:+.3e}")

# peak position check: at k=0.2, peak should sit near mu* = -gamma1 k^2 = +1.095*0.04 = 0.0438
k0 = 0.2
mus_scan = np.linspace(0.01, 0.09, 9)
plan2 = SweepPlan(crit=crit_b, B0=B0, mus=tuple(mus_scan), ks=(k0,), js=(1,), eval_grid=Grid3(2.0, 11))
res2 = resonance_sweep(plan2)
sups = np.array([r.sup_norm for r in res2.records])
print(f"[{time.time()-t0:6.1f}s] mu scan at k={k0}: peak at mu={mus_scan[np.argmax(sups)]:.3f} "
      f"(expected {-res2.gammas[0]*k0**2:.4f}); sups={np.round(sups,1)}")

# --- boundstate smoke: one mu on the bound side
t1 = time.time()
plan3 = SweepPlan(
    crit=crit_b, B0=B0, mus=(-0.05, +0.05), ks=(0.2,), js=(1,),
    n_kappa=60, kappa_range=(5e-3, 0.5),
)
recs = boundstate_track(plan3)
print(f"[{time.time()-t0:6.1f}s] boundstates ({time.time()-t1:.1f}s):")
for b in recs:
    pred = np.sqrt(abs(b.mu / res.gammas[0]))
    print(f"  mu={b.mu:+.3f} kappa={b.kappa:.5f} (line pred {pred:.5f}) E={b.E:.6f} sigma={b.sigma_min:.3e}")
if not recs:
    print("  (none)")

# --- free-case derivative: phi^1 == d chi exactly
rec = derivative_recursion(None, None, 1, (0.0, 0.0, 0.3), 1, eval_grid=Grid3(1.0, 5))
print(f"[{time.time()-t0:6.1f}s] free-case wsup(1)={rec['weighted_sup']:.6f} rcond={rec['rcond']}")

# --- lambda1 smoke on the resonance class
t2 = time.time()
crit_r = find_critical_coupling(shape, (-2.2, -0.4))
print(f"[{time.time()-t0:6.1f}s] res-class g*={crit_r.g_star:.6f} dim={crit_r.dim} lbar={crit_r.lambda_bar}")
ks = (0.05, 0.1, 0.2, 0.4)
out = lambda1_probe(crit_r, None, ks, eval_grid=Grid3(2.0, 11))
lsup = np.log([o["sup_norm"] for o in out])
slope = np.polyfit(np.log(ks), lsup, 1)[0]
print(f"[{time.time()-t0:6.1f}s] lambda1 sups={[round(o['sup_norm'],2) for o in out]} slope={slope:.3f} (expect ~ -1)")
