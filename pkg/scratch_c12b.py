import time

import numpy as np

from threshold_dirac.potentials import Grid3, build_potential
from threshold_dirac.critical import find_critical_coupling
from threshold_dirac.probes import derivative_alpha, derivative_recursion
from threshold_dirac.solver import solve_generalized

t0 = time.time()
grid = Grid3(1.0, 9)
shape = build_potential(grid, "spherical-well", 1.0, 1.0)
crit = find_critical_coupling(shape, (5.0, 7.0))
A = crit.critical_potential()
B0 = build_potential(grid, "spherical-well", 1.0, 1.0)
eg = Grid3(2.0, 11)
print(f"[{time.time()-t0:6.1f}s] g*={crit.g_star:.6f}", flush=True)


def band(mu, ks):
    Bmu = B0.rescaled(mu)
    out = {1: [], 2: []}
    for k in ks:
        rec = derivative_recursion(A, Bmu, 1, (0, 0, k), 2, eval_grid=eg)
        al = derivative_alpha(crit, Bmu, k)
        for m in (1, 2):
            env = k ** (-m) + al ** (m + 1)
            out[m].append(rec["orders"][m] / env)
        print(
            f"  mu={mu:.2f} k={k:.2f}: w1={rec['orders'][1]:.4g} w2={rec['orders'][2]:.4g} "
            f"alpha={al:.3f} r1={out[1][-1]:.4g} r2={out[2][-1]:.4g}",
            flush=True,
        )
    for m in (1, 2):
        arr = np.array(out[m])
        print(
            f"[{time.time()-t0:6.1f}s] mu={mu} m={m}: width={arr.max()/arr.min():.2f} "
            f"max/med={arr.max()/np.median(arr):.2f} med/min={np.median(arr)/arr.min():.2f}",
            flush=True,
        )


print("--- set 1: mu=0.1, resonance k*=0.302 inside the sweep ---", flush=True)
band(0.1, (0.05, 0.1, 0.2, 0.25, 0.3, 0.35, 0.4))
print("--- set 2: mu=0.3, all k below the resonance ---", flush=True)
band(0.3, (0.05, 0.1, 0.15, 0.2, 0.3, 0.4))

B = B0.rescaled(0.1)
rec = derivative_recursion(A, B, 1, (0, 0, 0.2), 1, eval_grid=eg)
d = 1e-3
pp, _ = solve_generalized(A, B, 1, (0, 0, 0.2 + d), eval_grid=eg)
pm, _ = solve_generalized(A, B, 1, (0, 0, 0.2 - d), eval_grid=eg)
fd = (pp.values - pm.values) / (2 * d)
wt = 1.0 / (1.0 + np.linalg.norm(eg.points, axis=1))
diff = np.max(wt * np.linalg.norm(rec["phi_m"].values - fd, axis=1))
ref = np.max(wt * np.linalg.norm(fd, axis=1))
print(f"[{time.time()-t0:6.1f}s] m=1 FD weighted rel err at (0.1, 0.2) = {diff/ref:.2e}", flush=True)
