"""Acceptance criteria, one test each, at the stated tolerances.

Each test records a PASS/FAIL line in ``RESULTS``; conftest prints them in
the terminal summary.  ``python tests/test_acceptance.py`` runs them
directly and prints the same lines.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import CYCLIC, NEGATION, golden_actions, rep_for  # noqa: E402
from linkgap.complex import (  # noqa: E402
    OCTAHEDRON_ANTIPODAL,
    TETRAHEDRON_ROTATION,
    build_action,
    check_orbit_identity,
    flat_torus,
    link_of,
    octahedron,
    random_invariant_pair_function,
    single_triangle,
    tetrahedron_boundary,
)
from linkgap.energy import global_energy, link_energy_sum, local_energy_sum  # noqa: E402
from linkgap.fixedpoint import apply_M, iterate, starting_map  # noqa: E402
from linkgap.gap import global_gap, lambda_spectral, lambda_variational  # noqa: E402
from linkgap.gauge import PowerGauge  # noqa: E402
from linkgap.maps import EquivariantMap, Representation  # noqa: E402
from linkgap.spaces import Euclidean, LpSpace, MetricTree, sample_axioms  # noqa: E402

X2, X3 = PowerGauge(2), PowerGauge(3)
RESULTS: dict = {}
SEEDS = range(10)
# the largest equivariance defect seen by any run with a signed-permutation representation
_EQUIVARIANCE: list = []


def record(n, passed, detail):
    line = f"CRITERION {n}: {'PASS' if passed else 'FAIL'} - {detail}"
    RESULTS[n] = line
    print(line)
    assert passed, line


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


# ---------------------------------------------------------------------------
# shared decay runs (criteria 2, 3, 8)

DECAY_SETUPS = {
    "octahedron": (octahedron, OCTAHEDRON_ANTIPODAL, NEGATION, 0.5),
    "tetrahedron": (tetrahedron_boundary, TETRAHEDRON_ROTATION, CYCLIC, 1 / 3),
}
_runs: dict = {}


def decay_runs(name):
    if name not in _runs:
        make, gen, iso, kappa = DECAY_SETUPS[name]
        X = make()
        G = build_action(X, [gen])
        lam = global_gap(X, G)
        assert lam.kappa == pytest.approx(kappa, abs=1e-12)
        rho = Representation(G, Euclidean(3), [iso])
        _runs[name] = [
            (iterate(starting_map(rho, seed), X2, lam.kappa, steps=60, stop_on_convergence=False), iso)
            for seed in SEEDS
        ]
        for tr, _ in _runs[name]:
            _EQUIVARIANCE.append(tr.summary["max_equivariance_defect"])
    return _runs[name]


# ---------------------------------------------------------------------------


def test_criterion_1_threshold_reproduction():
    out = []
    ok = True
    for make, lam_expected, kappa_expected in [(octahedron, 1.0, 0.5), (tetrahedron_boundary, 1.5, 1 / 3)]:
        t0 = time.perf_counter()
        X = make()
        lams = [lambda_spectral(link_of(X, u)) for u in X.vertices]
        r = global_gap(X)
        dt = time.perf_counter() - t0
        good = (
            X.weight_constant == 1.0
            and all(abs(x - lam_expected) <= 1e-9 for x in lams)
            and r.verdict
            and r.threshold == 0.5
            and abs(r.kappa - kappa_expected) <= 1e-9
            and dt < 1.0
        )
        ok &= good
        out.append(f"{make.__name__}: lambda={r.global_lambda:.9f} kappa={r.kappa:.9f} verdict={r.verdict} {dt * 1e3:.1f}ms")
    record(1, ok, "; ".join(out))


def test_criterion_2_decay():
    out = []
    ok = True
    for name, (_, _, _, kappa) in DECAY_SETUPS.items():
        worst_excess, worst_diam_step, worst_fixed = 0.0, 0, 0.0
        for tr, iso in decay_runs(name):
            E0 = tr.summary["initial_energy"]
            for r in tr.records:
                if r["step"] <= 40:
                    worst_excess = max(worst_excess, r["energy"] / (kappa ** r["step"] * E0) - 1.0)
            # step at which the image diameter first drops below 1e-8 (records hold phi_k)
            diams = [r["diameter"] for r in tr.records] + [tr.summary["final_diameter"]]
            first = next((k for k, d in enumerate(diams) if d < 1e-8), None)
            worst_diam_step = max(worst_diam_step, 10**9 if first is None else first)
            z = np.array(tr.summary["limit"])
            worst_fixed = max(worst_fixed, float(np.linalg.norm(iso(z) - z)))
        good = worst_excess <= 1e-9 and worst_diam_step <= 60 and worst_fixed <= 1e-8
        ok &= good
        out.append(
            f"{name}: max E_k/(kappa^k E_0)-1 = {worst_excess:.2e}, diameter<1e-8 by step {worst_diam_step}, "
            f"limit moved by {worst_fixed:.1e}"
        )
    record(2, ok, "; ".join(out))


def test_criterion_3_displacement_bound():
    worst = -np.inf
    count = 0
    for name in DECAY_SETUPS:
        for tr, _ in decay_runs(name):
            assert tr.summary["delta"] == 2.0
            for r in tr.records:
                worst = max(worst, r["displacement"] - r["bound"])
                count += 1
    record(3, worst <= 1e-12, f"{count} steps, max(displacement - bound) = {worst:.3e}")


def _instances():
    acts = golden_actions()
    for i in range(20):
        name, G, isos = acts[i % len(acts)]
        yield i, name, G, isos


def test_criterion_4_identities():
    worst = {"orbit_sum": 0.0, "global_local": 0.0, "link": 0.0, "midpoint": -np.inf, "cor1": -np.inf, "cor2": -np.inf}
    names = set()
    for i, name, G, isos in _instances():
        names.add(name)
        X = G.complex
        rng = np.random.default_rng(1000 + i)
        for l, k in ((0, 1), (0, 2), (1, 2)):
            lhs, rhs = check_orbit_identity(X, G, random_invariant_pair_function(X, G, l, k, rng), l, k)
            worst["orbit_sum"] = max(worst["orbit_sum"], _rel(lhs, rhs))
        rho = rep_for(G, isos)
        phi, phi2, psi, psi2 = (EquivariantMap.random(rho, rng) for _ in range(4))
        E = global_energy(phi, psi, X2)
        worst["global_local"] = max(worst["global_local"], _rel(E, local_energy_sum(phi, psi, X2)))
        Epp = global_energy(phi, phi, X2)
        worst["link"] = max(worst["link"], _rel(0.5 * X.weight_constant * Epp, link_energy_sum(phi, X2)))
        lhs = global_energy(phi.midpoint(phi2), psi.midpoint(psi2), X2)
        rhs = 0.5 * global_energy(phi, psi2, X2) + 0.5 * global_energy(phi2, psi, X2)
        worst["midpoint"] = max(worst["midpoint"], lhs - rhs)
        lam = global_gap(X, G).global_lambda
        Mphi = apply_M(phi, X2)
        Mp = phi.midpoint(Mphi)
        half = 0.5 * X.weight_constant * Epp
        worst["cor1"] = max(worst["cor1"], (lam * global_energy(Mphi, phi, X2) - half) / Epp)
        worst["cor2"] = max(worst["cor2"], (lam * global_energy(Mp, Mp, X2) - half) / Epp)
    ok = (
        worst["orbit_sum"] <= 1e-12
        and worst["global_local"] <= 1e-12
        and worst["link"] <= 1e-12
        and worst["midpoint"] <= 1e-12
        and worst["cor1"] <= 1e-10
        and worst["cor2"] <= 1e-10
        and {"octahedron-antipodal", "tetrahedron-rotation"} <= names
    )
    detail = ", ".join(f"{k}={v:.2e}" for k, v in worst.items())
    record(4, ok, f"20 instances: {detail}")


def test_criterion_5_spectral_variational():
    t0 = time.perf_counter()
    worst_low, worst_high, count = np.inf, 0.0, 0
    for X in (octahedron(), tetrahedron_boundary(), single_triangle(), flat_torus(4)):
        for u in X.vertices:
            L = link_of(X, u)
            spec = lambda_spectral(L)
            var = lambda_variational(L, Euclidean(len(L)), X2, restarts=64, seed=0).estimate
            worst_low = min(worst_low, var - (spec - 1e-6))
            worst_high = max(worst_high, var / spec)
            count += 1
    dt = time.perf_counter() - t0
    ok = worst_low >= 0 and worst_high <= 1.01 and dt < 30
    record(5, ok, f"{count} links, min(var - spec + 1e-6) = {worst_low:.2e}, max var/spec = {worst_high:.6f}, {dt:.1f}s")


def test_criterion_6_negative_control():
    X = flat_torus(4)
    r = global_gap(X)
    G = build_action(X, [])
    tr = iterate(starting_map(Representation.trivial(G, Euclidean(2)), 0), X2, r.kappa, steps=60)
    late = [x["ratio"] for x in tr.records[-10:] if x["ratio"] is not None]
    ok = (
        abs(r.global_lambda - 0.5) <= 1e-9
        and not r.verdict
        and not tr.summary["certifying"]
        and tr.summary["non_contractive"]
        and all(x["bound"] is None for x in tr.records)
    )
    record(
        6, ok,
        f"lambda={r.global_lambda:.9f} verdict={r.verdict} kappa={r.kappa:.9f} "
        f"certifying={tr.summary['certifying']} late ratio ~{max(late):.3f}",
    )


def test_criterion_7_general_spaces():
    out, ok = [], True
    # l^3 with x^3, antipodal action by negation
    G = build_action(octahedron(), [OCTAHEDRON_ANTIPODAL])
    rho = Representation(G, LpSpace(3, 3.0), [NEGATION])
    kappa = global_gap(octahedron(), G, "variational", LpSpace(3, 3.0), X3, restarts=8).kappa
    runs = [("l3/x3", iterate(starting_map(rho, s), X3, kappa, steps=200, certifying=False)) for s in range(3)]
    # metric tree with x^2: the rotation of the tetrahedron acts by rotating the star
    T = MetricTree.star(3)
    Gt = build_action(tetrahedron_boundary(), [TETRAHEDRON_ROTATION])
    rho_t = Representation(Gt, T, [T.automorphism((0, 2, 3, 1))])
    runs += [("tree/x2", iterate(starting_map(rho_t, s), X2, 1 / 3, steps=200, certifying=False)) for s in range(3)]
    for name, tr in runs:
        E = [r["energy"] for r in tr.records] + [tr.summary["final_energy"]]
        mono = all(b <= a for a, b in zip(E, E[1:]))
        good = mono and tr.summary["final_diameter"] < 1e-6 and tr.summary["steps"] <= 200
        ok &= good
        out.append(f"{name}: monotone={mono} steps={tr.summary['steps']} diam={tr.summary['final_diameter']:.1e}")
        if name.startswith("l3"):
            _EQUIVARIANCE.append(tr.summary["max_equivariance_defect"])
    for S in (Euclidean(3), LpSpace(3, 3.0), T):
        rep = sample_axioms(S, trials=10_000, seed=0)
        ok &= rep.passed(1e-12)
        out.append(f"{S!r} axioms worst={rep.worst():.1e}")
    record(7, ok, "; ".join(out))


def test_criterion_8_equivariance():
    for name in DECAY_SETUPS:
        decay_runs(name)
    G = build_action(octahedron(), [OCTAHEDRON_ANTIPODAL])
    rho = Representation(G, LpSpace(3, 3.0), [NEGATION])
    tr = iterate(starting_map(rho, 11), X3, 0.5, steps=30, certifying=False)
    _EQUIVARIANCE.append(tr.summary["max_equivariance_defect"])
    worst = max(_EQUIVARIANCE)
    record(8, worst <= 1e-8, f"{len(_EQUIVARIANCE)} runs, max defect = {worst:.2e}")


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    failed = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
