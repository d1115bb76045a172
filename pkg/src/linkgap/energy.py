"""Local energies on links, the global energy, and the gauge barycenter.

The barycenter of weighted points ``y_v`` is the unique minimizer of
``xi -> sum_v w_v f(d(xi, y_v))``.  Solvers, picked by space and gauge:

* Euclidean with f = x**2: the weighted mean (closed form).
* l^p with f = x**p (same p): the energy separates by coordinate; each
  coordinate is a monotone 1-D root find on the derivative.
* other vector-space cases: BFGS on the smooth convex energy.
* metric trees: exact search over the finitely many pieces on which every
  distance is affine in the position along an edge.
* anything else: :func:`geodesic_descent`, which only needs ``distance`` and
  ``combine``.

Every result is probed for first-order optimality along the geodesics
towards the data points; a failed probe triggers a geodesic-descent refinement.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .complex import LinkGraph, WeightedComplex, link_of
from .errors import DimensionMismatch, ForeignPoint, NoConvergence, SpaceMismatch
from .gauge import Gauge, PowerGauge
from .maps import EquivariantMap, _same_rep
from .spaces import Euclidean, LpSpace, MetricTree, Space, TreePoint

DESCENT_MAX_STEPS = 10_000
ARMIJO = 0.25
PROBE_FRACTIONS = (0.5, 2.0**-10, 2.0**-20)
POLISH_BELOW = 1e-10  # BFGS alone stalls near 1e-8 relative; Newton-polish tighter requests


@lru_cache(maxsize=None)
def cached_link(X: WeightedComplex, u: int) -> LinkGraph:
    return link_of(X, u)


def energy_at(S: Space, points, weights, gauge: Gauge, xi) -> float:
    return float(np.dot(weights, gauge(S.distances(points, xi))))


def _as_points(S: Space, points):
    return np.asarray(points, dtype=float) if S.is_vector else list(points)


# ---------------------------------------------------------------------------
# barycenter solvers


def _slope(S: Space, pts, w, gauge: Gauge, xi, y) -> float:
    """One-sided derivative of the energy leaving xi towards y, per unit length."""
    d = S.distances(pts, xi)
    rates = np.array([S.distance_slope(xi, y, p) for p in pts])
    return float(np.dot(w * gauge.derivative(d), rates))


def geodesic_descent(
    S: Space,
    points,
    weights,
    gauge: Gauge,
    tol: float = 1e-12,
    start=None,
    max_steps: int = DESCENT_MAX_STEPS,
):
    """Minimize the weighted energy by moving along geodesics towards data points.

    Each step takes the one-sided slope of the energy towards every data
    point and every midpoint of two data points (from ``S.distance_slope``)
    and follows the steepest geodesic; the midpoints narrow the angle to the
    true descent direction, which keeps the zig-zag short.  The
    energy is convex along it, so the step goes to the zero of its slope
    (bisection); the step is then checked against the Armijo condition
    (constant 0.25) and halved until it holds.  Stops when no direction
    descends faster than ``tol`` relative to the energy scale, or the step is
    shorter than ``tol`` times the diameter of the data.
    """
    pts = _as_points(S, points)
    w = np.asarray(weights, dtype=float)
    scale = S.diameter(pts)
    xi = pts[int(np.argmax(w))] if start is None else start
    if scale == 0.0:
        return pts[0]
    E = energy_at(S, pts, w, gauge, xi)
    slope_floor = tol * float(w.sum() * gauge.derivative(scale))
    step_floor = tol * scale
    targets = list(pts) + [S.midpoint(pts[i], pts[j]) for i in range(len(pts)) for j in range(i)]
    targets = _as_points(S, targets)
    for _ in range(max_steps):
        best = None
        for y, dy in zip(targets, S.distances(targets, xi)):
            if dy <= tol * scale:
                continue
            slope = _slope(S, pts, w, gauge, xi, y)
            if best is None or slope < best[0]:
                best = (slope, y, dy)
        if best is None or best[0] >= -slope_floor:
            return xi
        slope, y, dy = best
        # zero of the (monotone) slope along the geodesic xi -> y
        lo, hi = 0.0, 1.0
        if _slope(S, pts, w, gauge, S.combine(xi, y, 1.0 - 1e-12), y) <= 0.0:
            lo = hi
        while hi - lo > 1e-3 * step_floor / dy and lo < hi:
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _slope(S, pts, w, gauge, S.combine(xi, y, mid), y) < 0.0:
                lo = mid
            else:
                hi = mid
        t = hi
        while True:
            cand = S.combine(xi, y, t)
            Ec = energy_at(S, pts, w, gauge, cand)
            # slack for rounding: near the minimum energy differences sit
            # below the resolution of E itself
            if Ec <= E + ARMIJO * slope * t * dy + 8 * np.finfo(float).eps * E:
                break
            t *= 0.5
            if t * dy < step_floor:
                return xi
        xi, E = cand, Ec
        if t * dy < step_floor:
            return xi
    raise NoConvergence(f"geodesic descent hit the {max_steps}-step budget")


def _separable_lp(Y: np.ndarray, w: np.ndarray, p: float, tol: float) -> np.ndarray:
    """Coordinate-wise minimizer of sum_v w_v |s - y_v|^p by bisection on the derivative.

    ``Y`` has shape (..., points, dim); leading axes are independent problems.
    """
    lo, hi = Y.min(axis=-2), Y.max(axis=-2)
    atol = tol * np.maximum((hi - lo).max(axis=-1, keepdims=True), 1e-300)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        diff = mid[..., None, :] - Y
        g = np.einsum("v,...vd->...d", w, np.sign(diff) * np.abs(diff) ** (p - 1.0))
        stuck = (mid == lo) | (mid == hi)
        lo = np.where(g < 0, mid, lo)
        hi = np.where(g < 0, hi, mid)
        if np.all((hi - lo <= atol) | stuck):
            break
    return 0.5 * (lo + hi)


def _lp_norm_grad(diff: np.ndarray, dist: np.ndarray, p: float) -> np.ndarray:
    out = np.zeros_like(diff)
    nz = dist > 0
    if p == 2.0:
        out[nz] = diff[nz] / dist[nz, None]
    else:
        out[nz] = np.sign(diff[nz]) * (np.abs(diff[nz]) / dist[nz, None]) ** (p - 1.0)
    return out


def _smooth_vector(S: LpSpace, Y: np.ndarray, w: np.ndarray, gauge: Gauge, tol: float, scale: float, start=None) -> np.ndarray:
    centre = w @ Y / w.sum()
    Z = (Y - centre) / scale
    e0 = float(w.sum() * gauge(scale))

    def fun(z):
        diff = z[None, :] - Z
        dist = S.norm(diff, axis=1)
        val = float(w @ gauge(scale * dist)) / e0
        coef = w * gauge.derivative(scale * dist) * scale / e0
        return val, (coef[:, None] * _lp_norm_grad(diff, dist, S.p)).sum(axis=0)

    z0 = np.zeros(S.dim) if start is None else (np.asarray(start, dtype=float) - centre) / scale
    res = minimize(fun, z0, jac=True, method="BFGS", options={"gtol": 1e-15, "maxiter": 20_000, "xrtol": tol})
    z = res.x
    if tol >= POLISH_BELOW:
        return centre + scale * z
    # Newton polish with a central-difference Hessian of the exact gradient
    g = fun(z)[1]
    for _ in range(20):
        h = 1e-6
        H = np.empty((S.dim, S.dim))
        for i in range(S.dim):
            e = np.zeros(S.dim)
            e[i] = h
            H[:, i] = (fun(z + e)[1] - fun(z - e)[1]) / (2 * h)
        try:
            step = np.linalg.solve(0.5 * (H + H.T), g)
        except np.linalg.LinAlgError:
            break
        z_new = z - step
        g_new = fun(z_new)[1]
        if not np.linalg.norm(g_new) < np.linalg.norm(g):
            break
        z, g = z_new, g_new
        if np.max(np.abs(step)) <= tol:
            break
    return centre + scale * z


def _tree_segment_min(alpha, beta, w, gauge: Gauge, lo: float, hi: float, tol: float) -> float:
    """argmin over s in [lo, hi] of sum w f(alpha s + beta), alpha in {+1, -1}."""
    if isinstance(gauge, PowerGauge) and gauge.p == 2.0:
        s = -float(np.dot(w, alpha * beta)) / float(w.sum())
        return min(max(s, lo), hi)

    def slope(s):
        d = np.maximum(alpha * s + beta, 0.0)
        return float(np.dot(w * alpha, gauge.derivative(d)))

    if slope(lo) >= 0:
        return lo
    if slope(hi) <= 0:
        return hi
    a, b = lo, hi
    atol = tol * max(hi - lo, 1e-300)
    while b - a > atol:
        m = 0.5 * (a + b)
        if m in (a, b):
            break
        if slope(m) < 0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _tree_barycenter(T: MetricTree, pts: list, w: np.ndarray, gauge: Gauge, tol: float) -> TreePoint:
    Dv = np.array([T.to_vertices(y) for y in pts])  # (points, tree vertices)
    cands = [T.vertex(v) for v in range(T.vertex_count)] + list(pts)
    energies = list((w[:, None] * gauge(Dv)).sum(axis=0)) + [energy_at(T, pts, w, gauge, y) for y in pts]
    best = cands[int(np.argmin(energies))]
    best_E = min(energies)

    # pieces adjacent to the best breakpoint; the convex energy has its
    # minimizer on one of them
    segments = []
    if 0.0 < best.offset < T.edges[best.edge][2]:
        incident = [(best.edge, best.offset)]
    else:
        a, b, L = T.edges[best.edge]
        v = a if best.offset <= 0.0 else b
        incident = []
        for nb in sorted(T.graph[v]):
            e = T.graph[v][nb]["index"]
            incident.append((e, 0.0 if T.edges[e][0] == v else T.edges[e][2]))
    for e, s0 in incident:
        L = T.edges[e][2]
        bps = sorted({0.0, L} | {y.offset for y in pts if y.edge == e})
        left = max((b for b in bps if b < s0), default=None)
        right = min((b for b in bps if b > s0), default=None)
        if left is not None:
            segments.append((e, left, s0))
        if right is not None:
            segments.append((e, s0, right))

    for e, lo, hi in segments:
        a, b, L = T.edges[e]
        mid = 0.5 * (lo + hi)
        alpha = np.empty(len(pts))
        beta = np.empty(len(pts))
        for i, y in enumerate(pts):
            if y.edge == e:
                if y.offset <= mid:
                    alpha[i], beta[i] = 1.0, -y.offset
                else:
                    alpha[i], beta[i] = -1.0, y.offset
            elif Dv[i, a] < Dv[i, b]:
                alpha[i], beta[i] = 1.0, Dv[i, a]
            else:
                alpha[i], beta[i] = -1.0, L + Dv[i, b]
        s = _tree_segment_min(alpha, beta, w, gauge, lo, hi, tol)
        cand = T.canonical(TreePoint(e, s))
        Ec = energy_at(T, pts, w, gauge, cand)
        if Ec < best_E:
            best, best_E = cand, Ec
    return best


def probe_optimality(S: Space, points, weights, gauge: Gauge, xi, tol: float) -> float:
    """Largest energy decrease found by stepping from ``xi`` towards data points,
    relative to the energy scale ``sum w f(diam)``."""
    pts = _as_points(S, points)
    w = np.asarray(weights, dtype=float)
    scale = float(w.sum() * gauge(S.diameter(pts)))
    if scale == 0.0:
        return 0.0
    E = energy_at(S, pts, w, gauge, xi)
    worst = 0.0
    for y in pts:
        if S.distance(xi, y) == 0.0:
            continue
        for t in PROBE_FRACTIONS:
            worst = max(worst, (E - energy_at(S, pts, w, gauge, S.combine(xi, y, t))) / scale)
    return worst


def barycenter(S: Space, points, weights, gauge: Gauge, tol: float = 1e-12, certify: bool = True, start=None):
    """The minimizer of ``xi -> sum_v w_v f(d(xi, y_v))`` over ``S``.

    ``start`` only matters for the iterative solvers (BFGS, geodesic descent).
    """
    pts = _as_points(S, points)
    w = np.asarray(weights, dtype=float)
    if len(pts) == 0:
        raise ValueError("barycenter of an empty set")
    scale = S.diameter(pts)
    if scale == 0.0:
        return pts[0].copy() if S.is_vector else pts[0]
    if isinstance(S, LpSpace):
        if isinstance(gauge, PowerGauge) and gauge.p == 2.0 and isinstance(S, Euclidean):
            return w @ pts / w.sum()
        if isinstance(gauge, PowerGauge) and gauge.p == S.p:
            xi = _separable_lp(pts, w, S.p, tol)
        else:
            xi = _smooth_vector(S, pts, w, gauge, tol, scale, start)
    elif isinstance(S, MetricTree):
        xi = _tree_barycenter(S, pts, w, gauge, tol)
    else:
        return geodesic_descent(S, pts, w, gauge, tol, start=start)
    if certify and probe_optimality(S, pts, w, gauge, xi, tol) > tol:
        xi = geodesic_descent(S, pts, w, gauge, tol, start=xi)
        if probe_optimality(S, pts, w, gauge, xi, tol) > tol:
            raise NoConvergence("minimizer failed the optimality probe")
    return xi


# ---------------------------------------------------------------------------
# energies on a complex


def link_values(phi: EquivariantMap, u: int):
    """(link vertices, their images under phi, weights m(u, v))."""
    L = cached_link(phi.complex, u)
    pts = [phi(v) for v in L.vertices]
    w = np.array([L.vertex_weight[v] for v in L.vertices])
    return L.vertices, _as_points(phi.space, pts), w


def local_energy(phi: EquivariantMap, u: int, xi, gauge: Gauge) -> float:
    """sum over link vertices v of m(u, v) f(d(xi, phi(v)))."""
    try:
        xi = phi.space.check(xi)
    except (ForeignPoint, DimensionMismatch) as exc:
        raise SpaceMismatch(str(exc)) from exc
    _, pts, w = link_values(phi, u)
    return energy_at(phi.space, pts, w, gauge, xi)


def minimize_local_energy(phi: EquivariantMap, u: int, gauge: Gauge, tol: float = 1e-12, certify: bool = True):
    _, pts, w = link_values(phi, u)
    return barycenter(phi.space, pts, w, gauge, tol, certify)


def link_edge_energy(phi: EquivariantMap, u: int, gauge: Gauge) -> float:
    """sum over unordered link edges {v, w} of m(u, v, w) f(d(phi(v), phi(w)))."""
    L = cached_link(phi.complex, u)
    d = phi.space.distance
    return float(sum(m * gauge(d(phi(v), phi(x))) for (v, x), m in L.edge_weight.items()))


def global_energy(phi: EquivariantMap, psi: EquivariantMap, gauge: Gauge) -> float:
    """Stabilizer-weighted sum over ordered-edge representatives (u, v) of
    m(u, v) f(d(phi(u), psi(v)))."""
    _same_rep(phi, psi)
    X = phi.complex
    orb = phi.action.orbits
    d = phi.space.distance
    total = 0.0
    for u, v in orb.representatives[1]:
        total += X.weight((u, v)) / orb.stabilizer[1][(u, v)] * float(gauge(d(phi(u), psi(v))))
    return total


def local_energy_sum(phi: EquivariantMap, psi: EquivariantMap, gauge: Gauge) -> float:
    """sum over vertex representatives u of E_{u,phi}(psi(u)) / |stabilizer of u|."""
    _same_rep(phi, psi)
    orb = phi.action.orbits
    return sum(local_energy(phi, u, psi(u), gauge) / orb.vertex_stabilizer(u) for u in orb.vertex_reps())


def link_energy_sum(phi: EquivariantMap, gauge: Gauge) -> float:
    """sum over vertex representatives u of link_edge_energy(u) / |stabilizer of u|."""
    orb = phi.action.orbits
    return sum(link_edge_energy(phi, u, gauge) / orb.vertex_stabilizer(u) for u in orb.vertex_reps())
