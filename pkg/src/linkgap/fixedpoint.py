"""The barycenter operator M, the half step M' = mid(phi, M phi), the linear
averaging variant, and the contracting iteration phi_{k+1} = M' phi_k.

When lam > C/2, kappa = C / (2 lam) < 1 and the energy E(phi_k, phi_k)
decays at least like kappa**k.  The iteration records every quantity the
contraction argument uses so the trace itself is the certificate:

* decay        E_k <= kappa E_{k-1} + 1e-12 E_0
* chain        E(phi_k, phi_{k+1}) <= E_k   (non-strict, with tolerance)
* displacement d(phi_k(u), phi_{k+1}(u)) <= 2 f^-1(kappa**k E_0 / delta)
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .energy import global_energy, link_values, minimize_local_energy
from .errors import UnsupportedSpace
from .gauge import Gauge
from .maps import EquivariantMap, fixed_point_of
from .parallel import pmap
from .spaces import Euclidean

INNER_TOL = 1e-12
DECAY_SLACK = 1e-12  # relative to E_0
RATIO_SLACK = 1e-9
BOUND_SLACK = 1e-12
CHAIN_RTOL = 1e-12
CONVERGENCE_RTOL = 1e-8
FIXED_ATOL = 1e-8
DEFAULT_STEPS = 200

TOLERANCES = {
    "inner_minimizer": INNER_TOL,
    "decay_slack": DECAY_SLACK,
    "ratio_slack": RATIO_SLACK,
    "bound_slack": BOUND_SLACK,
    "chain_rtol": CHAIN_RTOL,
    "convergence_rtol": CONVERGENCE_RTOL,
    "fixed_atol": FIXED_ATOL,
}


def apply_M(phi: EquivariantMap, gauge: Gauge, tol: float = INNER_TOL) -> EquivariantMap:
    """Barycenter on each representative's link, extended equivariantly."""
    reps = phi.action.orbits.vertex_reps()
    vals = pmap(lambda u: minimize_local_energy(phi, u, gauge, tol), reps)
    return EquivariantMap.from_representatives(phi.rep, dict(zip(reps, vals)))


def apply_Mprime(phi: EquivariantMap, gauge: Gauge, tol: float = INNER_TOL) -> EquivariantMap:
    return phi.midpoint(apply_M(phi, gauge, tol))


def apply_M_avg(phi: EquivariantMap) -> EquivariantMap:
    """m_u-weighted linear average of the link values (vector targets only)."""
    if not phi.space.is_vector:
        raise UnsupportedSpace("the linear average needs a vector-space target")
    reps = phi.action.orbits.vertex_reps()
    vals = {}
    for u in reps:
        _, pts, w = link_values(phi, u)
        vals[u] = w @ pts / w.sum()
    return EquivariantMap.from_representatives(phi.rep, vals)


def equivariance_defect(phi: EquivariantMap, Mphi: EquivariantMap, gauge: Gauge, tol: float = INNER_TOL) -> float:
    """max over generators g and representatives u of
    d(rho(g) M phi(u), M_{g.u} phi), the right side minimized directly."""
    G = phi.action
    S = phi.space
    worst = 0.0
    for gi, gen in enumerate(G.generators):
        T = phi.rep.generator_isometries[gi]
        for u in G.orbits.vertex_reps():
            direct = minimize_local_energy(phi, gen[u], gauge, tol)
            worst = max(worst, S.distance(T(Mphi(u)), direct))
    return worst


def edge_delta(phi: EquivariantMap) -> float:
    """min over ordered-edge representatives of m(e) / |stabilizer of e|.

    Every term of E(psi, psi) carries this factor, so delta f(d(psi(u), psi(v)))
    <= E(psi, psi) on every edge.
    """
    X = phi.complex
    orb = phi.action.orbits
    return min(X.weight(e) / orb.stabilizer[1][e] for e in orb.representatives[1])


def _rep_displacement(phi: EquivariantMap, psi: EquivariantMap) -> float:
    d = phi.space.distance
    return max(d(phi(u), psi(u)) for u in phi.action.orbits.vertex_reps())


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    final: EquivariantMap | None = None

    COLUMNS = (
        "step", "energy", "ratio", "cross_energy", "cross_M_energy", "displacement", "bound",
        "diameter", "equivariance_defect", "decay_ok", "chain_ok", "bound_ok",
    )

    def jsonl(self) -> str:
        lines = [json.dumps(r, sort_keys=True) for r in self.records]
        lines.append(json.dumps({"summary": self.summary}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in self.COLUMNS})
        return buf.getvalue()


def iterate(
    phi0: EquivariantMap,
    gauge: Gauge,
    kappa: float,
    steps: int = DEFAULT_STEPS,
    operator: str = "barycenter",
    certifying: bool = True,
    tol: float = INNER_TOL,
    check_equivariance: bool = True,
    stop_on_convergence: bool = True,
) -> IterationTrace:
    """Run phi_{k+1} = mid(phi_k, M phi_k) and record the contraction data.

    ``kappa`` comes from a gap report; pass ``certifying=False`` when it is
    only a variational upper-bound estimate.  The record for step k holds
    E_k and the displacement from phi_k to phi_{k+1}.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if operator not in ("barycenter", "average"):
        raise ValueError(f"unknown operator {operator!r}")
    if operator == "average" and not phi0.space.is_vector:
        raise UnsupportedSpace("the linear average needs a vector-space target")
    S = phi0.space
    delta = edge_delta(phi0)
    E0 = global_energy(phi0, phi0, gauge)
    d0 = phi0.diameter()
    threshold = CONVERGENCE_RTOL * (1.0 + d0)
    contractive_claim = kappa < 1.0

    trace = IterationTrace()
    phi, E_prev = phi0, None
    converged = phi0.diameter() < threshold
    non_contractive = not contractive_claim
    k = 0
    while not (converged and stop_on_convergence) and k < steps:
        E = global_energy(phi, phi, gauge)
        Mphi = apply_M_avg(phi) if operator == "average" else apply_M(phi, gauge, tol)
        nxt = phi.midpoint(Mphi)
        cross = global_energy(phi, nxt, gauge)
        disp = _rep_displacement(phi, nxt)
        bound = 2.0 * float(gauge.inverse(kappa**k * E0 / delta)) if contractive_claim else None
        ratio = E / E_prev if E_prev else None
        decay_ok = None if E_prev is None else bool(E <= kappa * E_prev + DECAY_SLACK * E0)
        # ratios at energies below the decay slack are rounding noise
        if decay_ok is False and ratio > kappa + RATIO_SLACK:
            non_contractive = True
        defect = None
        if check_equivariance and operator == "barycenter":
            defect = equivariance_defect(phi, Mphi, gauge, tol)
        trace.records.append({
            "step": k,
            "energy": E,
            "ratio": ratio,
            "cross_energy": cross,
            "cross_M_energy": global_energy(Mphi, phi, gauge),
            "displacement": disp,
            "bound": bound,
            "diameter": phi.diameter(),
            "equivariance_defect": defect,
            "decay_ok": decay_ok,
            "chain_ok": bool(cross <= E + CHAIN_RTOL * max(E0, 1e-300)),
            "bound_ok": None if bound is None else bool(disp <= bound + BOUND_SLACK * (1.0 + bound)),
        })
        phi, E_prev = nxt, E
        k += 1
        converged = phi.diameter() < threshold

    # barycenter of all values: unique, hence fixed by every rho(g)
    limit = fixed_point_of(S, list(phi.values))
    trace.final = phi
    trace.summary = {
        "steps": k,
        "converged": bool(converged),
        "initial_energy": E0,
        "initial_diameter": d0,
        "final_energy": global_energy(phi, phi, gauge),
        "final_diameter": phi.diameter(),
        "convergence_threshold": threshold,
        "delta": delta,
        "kappa": kappa,
        "certifying": bool(certifying and contractive_claim),
        "non_contractive": bool(non_contractive),
        "limit": S.point_to_json(limit),
        "limit_fixed_defect": phi.rep.fixed_defect(limit),
        "limit_is_fixed": bool(phi.rep.fixed_defect(limit) <= FIXED_ATOL),
        "limit_spread": float(np.max(S.distances(list(phi.values), limit))),
        "operator": operator,
        "all_decay_ok": all(r["decay_ok"] is not False for r in trace.records),
        "all_bound_ok": all(r["bound_ok"] is not False for r in trace.records),
        "all_chain_ok": all(r["chain_ok"] for r in trace.records),
        "max_equivariance_defect": max((r["equivariance_defect"] or 0.0 for r in trace.records), default=0.0),
        "tolerances": TOLERANCES,
    }
    return trace


def starting_map(rep, seed: int, scale: float = 1.0) -> EquivariantMap:
    """Seeded random equivariant map."""
    return EquivariantMap.random(rep, np.random.default_rng(seed), scale)


def spectral_regime(space, gauge) -> bool:
    return isinstance(space, Euclidean) and getattr(gauge, "p", None) == 2.0
