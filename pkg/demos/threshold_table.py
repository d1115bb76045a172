"""Link constants of the reference complexes and the contraction verdict.

Prints, for each complex, the spectral constant of every vertex link, the
threshold C/2, the contraction factor kappa and the verdict.  The flat
torus sits exactly on the threshold and fails the strict inequality.

    python demos/threshold_table.py
"""
from linkgap import flat_torus, global_gap, link_of, octahedron, single_triangle, tetrahedron_boundary
from linkgap.gap import lambda_spectral

COMPLEXES = {
    "octahedron": octahedron(),
    "tetrahedron boundary": tetrahedron_boundary(),
    "single triangle": single_triangle(),
    "flat torus 4x4": flat_torus(4),
}

print(f"{'complex':22s} {'link sizes':>10s} {'lambda':>10s} {'C/2':>6s} {'kappa':>8s}  verdict")
for name, X in COMPLEXES.items():
    sizes = sorted({len(link_of(X, u)) for u in X.vertices})
    lams = [lambda_spectral(link_of(X, u)) for u in X.vertices]
    r = global_gap(X)
    assert abs(min(lams) - r.global_lambda) < 1e-12
    print(f"{name:22s} {str(sizes):>10s} {r.global_lambda:10.6f} {r.threshold:6.2f} {r.kappa:8.4f}  {r.verdict}")
