"""Beyond Hilbert space: an l^3 target with f = x^3 and a metric tree with x^2.

No eigenvalue route exists here, so the link constant is estimated by a
randomized search; the result is only an upper bound and is labelled so.
The iteration still contracts and lands on a point fixed by the action.

    python demos/general_targets.py
"""
from linkgap import (
    OCTAHEDRON_ANTIPODAL,
    TETRAHEDRON_ROTATION,
    AffineIsometry,
    LpSpace,
    MetricTree,
    PowerGauge,
    Representation,
    build_action,
    global_gap,
    iterate,
    octahedron,
    starting_map,
    tetrahedron_boundary,
)

# l^3 and the antipodal action by -x
X = octahedron()
G = build_action(X, [OCTAHEDRON_ANTIPODAL])
S, f = LpSpace(3, 3.0), PowerGauge(3)
report = global_gap(X, G, "variational", S, f, restarts=16, seed=0)
print(f"l^3, x^3: lambda <= {report.global_lambda:.4f} ({report.label}), kappa ~ {report.kappa:.4f}")
rho = Representation(G, S, [AffineIsometry((0, 1, 2), (-1.0, -1.0, -1.0), (0.0, 0.0, 0.0))])
tr = iterate(starting_map(rho, 1), f, report.kappa, certifying=False)
ratios = [r["ratio"] for r in tr.records if r["ratio"] is not None]
print(f"  {tr.summary['steps']} steps, worst energy ratio {max(ratios):.4f}, "
      f"final diameter {tr.summary['final_diameter']:.1e}")

# a star with three legs, rotated by the order-3 symmetry of the tetrahedron
T = MetricTree.star(3)
Xt = tetrahedron_boundary()
Gt = build_action(Xt, [TETRAHEDRON_ROTATION])
report = global_gap(Xt, Gt, "variational", T, PowerGauge(2), restarts=8, seed=0, budget=200)
print(f"star tree, x^2: lambda <= {report.global_lambda:.4f} ({report.label})")
rho = Representation(Gt, T, [T.automorphism((0, 2, 3, 1))])
tr = iterate(starting_map(rho, 2), PowerGauge(2), report.kappa, certifying=False)
print(f"  {tr.summary['steps']} steps, limit {tr.summary['limit']} (the centre is the only fixed point)")
