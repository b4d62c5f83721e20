import sys
import time

from threshold_dirac.potentials import Grid3, build_potential
from threshold_dirac.critical import find_critical_coupling

SHARP = -1.1129234484805564

w = float(sys.argv[1])
sub = int(sys.argv[2])

t0 = time.time()
grid = Grid3(1.0, 13)
shape = build_potential(
    grid, "spherical-well", 1.0, 1.0, w=w, cell_average=True, subsamples=sub
)
crit = find_critical_coupling(shape, (-1.6, -1.0))
gap = abs(crit.g_star - SHARP) / abs(SHARP)
print(
    f"[{time.time()-t0:6.1f}s] n=13 w={w} sub={sub} g*={crit.g_star:.8f} "
    f"gap={100*gap:.3f}% dim={crit.dim} lbar={crit.lambda_bar}",
    flush=True,
)
