import time

import numpy as np

from threshold_dirac.potentials import Grid3, build_potential
from threshold_dirac.critical import find_critical_coupling
from threshold_dirac.probes import derivative_alpha, derivative_recursion

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
    kstar = np.sqrt(mu / 1.0950)
    for k in ks:
        rec = derivative_recursion(A, Bmu, 1, (0, 0, k), 2, eval_grid=eg)
        al = derivative_alpha(crit, Bmu, k)
        for m in (1, 2):
            env = k ** (-m) + al ** (m + 1)
            out[m].append(rec["orders"][m] / env)
        print(
            f"  mu={mu:.2f} k={k:.3f} (k/k*={k/kstar:.2f}): w1={rec['orders'][1]:.4g} "
            f"w2={rec['orders'][2]:.4g} alpha={al:.3f} r1={out[1][-1]:.4g} r2={out[2][-1]:.4g}",
            flush=True,
        )
    for m in (1, 2):
        arr = np.array(out[m])
        print(
            f"[{time.time()-t0:6.1f}s] mu={mu} m={m}: width={arr.max()/arr.min():.2f} "
            f"max/med={arr.max()/np.median(arr):.2f} med/min={np.median(arr)/arr.min():.2f}",
            flush=True,
        )


ks = (0.02, 0.03, 0.045, 0.07, 0.1)
print("--- mu=0.05 (k* = 0.214) ---", flush=True)
band(0.05, ks)
print("--- mu=0.2 (k* = 0.427) ---", flush=True)
band(0.2, ks)
