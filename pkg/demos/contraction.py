"""Energy decay of the half-step iteration on the octahedron.

The antipodal map acts on the octahedron and by -x on R^3.  Starting from a
random equivariant map, the energy must shrink at least by kappa = 1/2 per
step; the observed rate here is 1/4.  The displacement column stays under
the bound 2 sqrt(kappa^k E_0 / delta) at every step.

    python demos/contraction.py [seed]
"""
import sys

import numpy as np

from linkgap import (
    OCTAHEDRON_ANTIPODAL,
    AffineIsometry,
    Euclidean,
    PowerGauge,
    Representation,
    build_action,
    global_gap,
    iterate,
    octahedron,
    starting_map,
)

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
X = octahedron()
G = build_action(X, [OCTAHEDRON_ANTIPODAL])
rho = Representation(G, Euclidean(3), [AffineIsometry((0, 1, 2), (-1.0, -1.0, -1.0), (0.0, 0.0, 0.0))])
kappa = global_gap(X, G).kappa

trace = iterate(starting_map(rho, seed), PowerGauge(2), kappa, steps=60)
E0 = trace.summary["initial_energy"]
print(f"kappa = {kappa}, E_0 = {E0:.6g}")
print(f"{'k':>3s} {'E_k':>12s} {'kappa^k E_0':>12s} {'ratio':>8s} {'disp':>10s} {'bound':>10s}")
for r in trace.records[::4]:
    ratio = "" if r["ratio"] is None else f"{r['ratio']:.4f}"
    print(f"{r['step']:3d} {r['energy']:12.4e} {kappa ** r['step'] * E0:12.4e} {ratio:>8s} "
          f"{r['displacement']:10.3e} {r['bound']:10.3e}")
s = trace.summary
print(f"converged after {s['steps']} steps to {np.round(s['limit'], 12)}, "
      f"fixed by the action: {s['limit_is_fixed']}")
