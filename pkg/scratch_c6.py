import time

from threshold_dirac.potentials import Grid3, build_potential
from threshold_dirac.critical import find_critical_coupling

SHARP = -1.1129234484805564

t0 = time.time()
rows = []
for n, w in ((9, 0.12), (11, 0.06), (13, 0.03)):
    grid = Grid3(1.0, n)
    shape = build_potential(grid, "spherical-well", 1.0, 1.0, w=w, cell_average=True)
    crit = find_critical_coupling(shape, (-1.6, -1.0))
    gap = abs(crit.g_star - SHARP) / abs(SHARP)
    rows.append((n, w, crit.g_star, gap))
    print(
        f"[{time.time()-t0:7.1f}s] n={n:2d} w={w:.2f} g*={crit.g_star:.8f} "
        f"gap={100*gap:.3f}% dim={crit.dim} lbar={crit.lambda_bar} "
        f"nsup={len(shape.support_indices())}",
        flush=True,
    )
print("monotone:", all(rows[i][3] > rows[i + 1][3] for i in range(len(rows) - 1)))
