import time

import numpy as np

from threshold_dirac.potentials import Grid3, SpinorField, build_potential
from threshold_dirac.critical import find_critical_coupling, make_projectors
from threshold_dirac.probes import inverse_bound_probe

t0 = time.time()
grid = Grid3(1.0, 9)
shape = build_potential(grid, "spherical-well", 1.0, 1.0)
crit = find_critical_coupling(shape, (5.0, 7.0))
B0 = build_potential(grid, "spherical-well", 1.0, 1.0)
proj = make_projectors(crit)
print(f"[{time.time()-t0:.1f}s] crit ready", flush=True)

pts = grid.points
gauss = np.exp(-2.0 * np.sum(pts**2, axis=1))

# symmetric probe field (upper components only, radial profile)
m1 = np.zeros((grid.n_nodes, 4), dtype=np.complex128)
m1[:, 0] = gauss
m1[:, 1] = 0.5 * gauss

# generic probe field: anisotropic profile, all four components
aniso = gauss * (1.0 + 0.7 * pts[:, 0] + 0.4 * pts[:, 1] - 0.3 * pts[:, 2])
m2 = np.outer(aniso, np.array([1.0, 0.3, 0.25 - 0.15j, -0.4]))

for label, mv in (("sym", m1), ("generic", m2)):
    mp = proj.project("M_perp", SpinorField(grid, mv))
    print(f"--- m_perp[{label}]  sup={mp.sup_norm():.3f}")
    ks = (0.05, 0.1, 0.2, 0.4, 0.8)
    vals = []
    for k in ks:
        rep = inverse_bound_probe(crit, B0.rescaled(0.2), (0, 0, k), crit.basis[0], mp)
        vals.append(rep["n_par_mperp"])
        print(
            f"  k={k:4.2f}: n_par={rep['n_par_mperp']:.4e}  bound k^2/D={k**2/rep['denominator']:.3e} "
            f"D={rep['denominator']:.4f} perp={rep['n_perp_mperp']:.3f}",
            flush=True,
        )
    sl = np.polyfit(np.log(ks), np.log(vals), 1)[0]
    sl4 = np.polyfit(np.log(ks[:4]), np.log(vals[:4]), 1)[0]
    print(f"  slope(all)={sl:.3f} slope(k<=0.4)={sl4:.3f}")
