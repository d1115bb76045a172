"""Link constants: the largest lam with lam * E_{u,phi}(M_u phi) <= link edge energy.

Two routes.  For Euclidean targets with f = x**2 the constant is C times the
spectral gap of the normalized link Laplacian (the local energy at the
barycenter is a weighted variance and the ratio is a Rayleigh quotient).
In general it is estimated by minimizing the ratio over sampled maps; that
gives an upper bound on the true constant, never a certificate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .complex import GroupAction, LinkGraph, WeightedComplex, build_action
from .energy import _separable_lp, barycenter, cached_link, energy_at
from .errors import AllSamplesDegenerate, Disconnected, TooSmall, UnsupportedMethod
from .gauge import Gauge, PowerGauge
from .parallel import pmap
from .spaces import Euclidean, LpSpace, MetricTree, Space

DEGENERATE_RTOL = 1e-14
DEFAULT_RESTARTS = 64
DEFAULT_BUDGET = 500
STEP_FLOOR = 1e-7  # compass step, relative to the map diameter
POLY_SCALES = (1e-2, 1e-1, 1.0, 1e1, 1e2)
ORBIT_CHECK_ATOL = 1e-9
UPPER_BOUND_LABEL = "upper bound estimate"
SEARCH_TOL = 1e-9


def _check_link(L: LinkGraph):
    if len(L) < 2:
        raise TooSmall(f"link of {L.center} has {len(L)} vertex")
    if not L.is_connected():
        raise Disconnected(f"link of {L.center} is disconnected")


def normalized_laplacian(L: LinkGraph) -> np.ndarray:
    """I - D^-1/2 A D^-1/2 with D the weighted degree."""
    A = L.adjacency()
    s = 1.0 / np.sqrt(A.sum(axis=1))
    return np.eye(len(A)) - s[:, None] * A * s[None, :]


def lambda_spectral(L: LinkGraph) -> float:
    """C times the smallest positive eigenvalue of the normalized link Laplacian."""
    _check_link(L)
    ev = np.linalg.eigvalsh(normalized_laplacian(L))
    return float(L.weight_constant * ev[1])


# ---------------------------------------------------------------------------
# variational estimate


def link_ratio(L: LinkGraph, S: Space, gauge: Gauge, values, certify: bool = False) -> tuple[float, float]:
    """(link edge energy, local energy at the barycenter) for link values in
    the order of ``L.vertices``.

    Uncertified calls use a loose barycenter tolerance: the energy error is
    quadratic in the position error, so 1e-9 is plenty inside the search.
    """
    idx = {v: i for i, v in enumerate(L.vertices)}
    w = np.array([L.vertex_weight[v] for v in L.vertices])
    pts = np.asarray(values, dtype=float) if S.is_vector else list(values)
    num = sum(m * float(gauge(S.distance(pts[idx[a]], pts[idx[b]]))) for (a, b), m in L.edge_weight.items())
    xi = barycenter(S, pts, w, gauge, tol=1e-12 if certify else SEARCH_TOL, certify=certify)
    return float(num), energy_at(S, pts, w, gauge, xi)


class _Ratio:
    """Batched ratio evaluation; vectorized for Euclidean with x**2 and l^p with x**p."""

    def __init__(self, L: LinkGraph, S: Space, gauge: Gauge):
        self.L, self.S, self.gauge = L, S, gauge
        idx = {v: i for i, v in enumerate(L.vertices)}
        self.w = np.array([L.vertex_weight[v] for v in L.vertices])
        self.ea = np.array([idx[a] for a, _ in L.edge_weight])
        self.eb = np.array([idx[b] for _, b in L.edge_weight])
        self.em = np.array(list(L.edge_weight.values()))
        self.fast = isinstance(S, Euclidean) and isinstance(gauge, PowerGauge) and gauge.p == 2.0
        self.separable = isinstance(S, LpSpace) and isinstance(gauge, PowerGauge) and gauge.p == S.p

        if self.fast:
            n = len(L.vertices)
            self.A = np.zeros((n, n))
            np.add.at(self.A, (self.ea, self.eb), self.em)
            np.add.at(self.A, (self.eb, self.ea), self.em)
            self.lap = np.diag(self.A.sum(axis=1)) - self.A

    def scale(self, values) -> float:
        return float(self.w.sum() * self.gauge(self.S.diameter(values)))

    def parts(self, batch) -> tuple[np.ndarray, np.ndarray]:
        """Numerators and denominators for a list of candidate maps."""
        if self.fast:
            P = np.asarray(batch, dtype=float)  # (B, n, dim)
            num = ((P[:, self.ea] - P[:, self.eb]) ** 2).sum(axis=2) @ self.em
            mean = np.einsum("i,bij->bj", self.w, P) / self.w.sum()
            den = ((P - mean[:, None, :]) ** 2).sum(axis=2) @ self.w
            return num, den
        if self.separable:
            P = np.asarray(batch, dtype=float)
            p = self.S.p
            num = (np.abs(P[:, self.ea] - P[:, self.eb]) ** p).sum(axis=2) @ self.em
            xi = _separable_lp(P, self.w, p, SEARCH_TOL)
            den = (np.abs(P - xi[:, None, :]) ** p).sum(axis=2) @ self.w
            return num, den
        nums, dens = [], []
        for vals in batch:
            n, d = link_ratio(self.L, self.S, self.gauge, vals)
            nums.append(n)
            dens.append(d)
        return np.array(nums), np.array(dens)


@dataclass
class VariationalResult:
    estimate: float
    witness: list
    restarts: int
    skipped: int
    history: list = field(default_factory=list)  # running minimum after each restart
    label: str = UPPER_BOUND_LABEL


def _normalize(S: Space, vals):
    if not S.is_vector:
        return vals
    P = np.asarray(vals, dtype=float)
    d = S.diameter(P)
    c = P.mean(axis=0)
    return list((P - c) / d) if d > 0 else vals


@lru_cache(maxsize=64)
def _coordinate_steps(n: int, dim: int) -> np.ndarray:
    """(n*dim*2, n, dim) unit offsets: +1 then -1 on each coordinate of each
    link value, in the order of ``LpSpace.perturbations`` applied point by point."""
    D = np.zeros((n, dim, 2, n, dim))
    i, k = np.meshgrid(np.arange(n), np.arange(dim), indexing="ij")
    D[i, k, 0, i, k] = 1.0
    D[i, k, 1, i, k] = -1.0
    D = D.reshape(n * dim * 2, n, dim)
    D.flags.writeable = False
    return D


def _candidates(S: Space, vals, h: float):
    if isinstance(S, LpSpace) and type(S).perturbations is LpSpace.perturbations:
        P = np.asarray(vals, dtype=float)
        return P[None] + h * _coordinate_steps(*P.shape)
    cands = []
    for i, x in enumerate(vals):
        for y in S.perturbations(x, h):
            c = list(vals)
            c[i] = y
            cands.append(c)
    return cands


def _compass(R: _Ratio, S: Space, vals: list, budget: int, renormalize: bool):
    """Steepest compass descent on the ratio, moving one link value at a time."""
    num, den = R.parts([vals])
    best = num[0] / den[0]
    h = 0.25 * S.diameter(vals)
    floor = STEP_FLOOR * S.diameter(vals)
    for _ in range(budget):
        cands = _candidates(S, vals, h)
        num, den = R.parts(cands)
        ok = den > DEGENERATE_RTOL * R.scale(vals)
        ratios = np.where(ok, num / np.where(ok, den, 1.0), np.inf)
        j = int(np.argmin(ratios))
        if ratios[j] < best:
            vals, best = list(cands[j]), float(ratios[j])
            if renormalize:
                vals = _normalize(S, vals)
                h = min(h, 0.25)
                floor = STEP_FLOOR
        else:
            h *= 0.5
            if h < floor:
                break
    return vals, best


def _diameter(P: np.ndarray) -> float:
    return float(np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2).max()))


def _compass_quadratic(R: _Ratio, vals, budget: int):
    """_compass for Euclidean targets with x**2, in closed form.

    Moving x_ik by s h changes the edge energy x^T Lap x by 2 s h (Lap x)_ik
    + h^2 Lap_ii and the weighted variance by w_i (2 s h (x_ik - mean_k)
    + h^2 (1 - w_i / W)); all 2 n dim moves are scored at once.  Moves are
    ordered like ``_coordinate_steps``, maps are kept at unit diameter.
    """
    w, lap = R.w, R.lap
    W = w.sum()
    P = np.asarray(vals, dtype=float)
    sign = np.array([1.0, -1.0])
    lap_ii = np.diag(lap)[:, None, None]
    shrink = (w * (1.0 - w / W))[:, None, None]
    wcol = w[:, None, None]

    def parts(P):
        g = lap @ P
        c = P - (w @ P) / W
        return g, c, float((P * g).sum()), float(w @ (c * c).sum(axis=1))

    g, c, num, den = parts(P)
    best = num / den
    h, floor = 0.25, STEP_FLOOR
    for _ in range(budget):
        nums = num + 2 * h * g[..., None] * sign + h * h * lap_ii
        dens = den + wcol * 2 * h * c[..., None] * sign + h * h * shrink
        ok = dens > DEGENERATE_RTOL * W
        ratios = np.where(ok, nums / np.where(ok, dens, 1.0), np.inf).ravel()
        j = int(np.argmin(ratios))
        if ratios[j] < best:
            i, k, s = np.unravel_index(j, nums.shape)
            P = P.copy()
            P[i, k] += sign[s] * h
            P = P - P.mean(axis=0)
            P = P / _diameter(P)
            g, c, num, den = parts(P)
            best = num / den
            h = min(h, 0.25)
        else:
            h *= 0.5
            if h < floor:
                break
    return list(P), best


def lambda_variational(
    L: LinkGraph,
    S: Space,
    gauge: Gauge,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    starts=None,
) -> VariationalResult:
    """Smallest ratio link_edge_energy / E_{u,phi}(M_u phi) found over random
    restarts, each refined by compass descent.  An upper bound on the true
    constant.  Maps whose local energy at the barycenter is below 1e-14 of
    the energy scale are skipped and do not count as restarts.

    For vector targets the dimension defaults to the number of link vertices
    when ``S`` has a different one.  ``starts`` replaces the random draws by
    the given list of maps (each a list of link values).
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    _check_link(L)
    n = len(L)
    if isinstance(S, LpSpace) and S.dim != n and starts is None:
        S = S.with_dim(n)
    R = _Ratio(L, S, gauge)
    rng = np.random.default_rng([seed, L.center])
    renormalize = S.is_vector and gauge.scale_invariant

    if starts is None:
        def draw(k):
            s = 1.0 if gauge.scale_invariant else POLY_SCALES[k % len(POLY_SCALES)]
            return [S.random_point(rng, s) for _ in range(n)]
        limit = 20 * restarts
    else:
        starts = [list(s) for s in starts]
        draw = starts.__getitem__
        limit = len(starts)

    best, witness, history = np.inf, None, []
    used = skipped = 0
    for k in range(limit):
        if used == restarts:
            break
        vals = draw(k)
        num, den = R.parts([vals])
        if not den[0] > DEGENERATE_RTOL * R.scale(vals):
            skipped += 1
            continue
        used += 1
        if renormalize:
            vals = _normalize(S, vals)
        if R.fast:
            vals, r = _compass_quadratic(R, vals, budget)
        else:
            vals, r = _compass(R, S, vals, budget, renormalize)
        if r < best:
            best, witness = r, vals
        history.append(best)
    if used == 0:
        raise AllSamplesDegenerate(f"every sampled map on the link of {L.center} was degenerate")
    num, den = link_ratio(L, S, gauge, witness, certify=True)
    return VariationalResult(float(num / den), witness, used, skipped, history)


# ---------------------------------------------------------------------------
# global report


@dataclass
class GapReport:
    method: str
    weight_constant: float
    entries: list  # one dict per vertex-orbit representative
    global_lambda: float
    threshold: float
    kappa: float
    verdict: bool
    certifying: bool
    orbit_check: dict | None
    params: dict

    @property
    def label(self) -> str:
        return "exact" if self.certifying else UPPER_BOUND_LABEL

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "label": self.label,
            "weight_constant": self.weight_constant,
            "entries": self.entries,
            "global_lambda": self.global_lambda,
            "threshold": self.threshold,
            "kappa": self.kappa,
            "verdict": self.verdict,
            "certifying": self.certifying,
            "orbit_check": self.orbit_check,
            "params": self.params,
            "conventions": {
                "constant_maps": "excluded from the ratio (0/0)",
                "target": "lambda is computed for the chosen target space only",
            },
        }


def _transport(G: GroupAction, elem: int, L: LinkGraph, values: list) -> list:
    """Values on the link of g.u induced from values on the link of u."""
    g = G.elements[elem]
    image = {g[v]: x for v, x in zip(L.vertices, values)}
    L2 = cached_link(G.complex, g[L.center])
    return [image[v] for v in L2.vertices]


def global_gap(
    X: WeightedComplex,
    G: GroupAction | None = None,
    method: str = "spectral",
    space: Space | None = None,
    gauge: Gauge | None = None,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
) -> GapReport:
    """Evaluate the link constant once per vertex-orbit representative and
    aggregate lam = min, threshold C/2, kappa = C / (2 lam)."""
    G = G or build_action(X, [])
    gauge = gauge or PowerGauge(2.0)
    orb = G.orbits
    reps = orb.vertex_reps()
    if method == "spectral":
        if space is not None and not isinstance(space, Euclidean):
            raise UnsupportedMethod("spectral route needs a euclidean target")
        if not (isinstance(gauge, PowerGauge) and gauge.p == 2.0):
            raise UnsupportedMethod("spectral route needs the gauge x**2")
        values = pmap(lambda u: lambda_spectral(cached_link(X, u)), reps)
        entries = [
            {"vertex": u, "orbit_size": orb.orbit_size[0][(u,)], "lambda_spectral": lam}
            for u, lam in zip(reps, values)
        ]
    elif method == "variational":
        if space is None:
            raise UnsupportedMethod("variational route needs a target space")
        results = pmap(
            lambda u: lambda_variational(cached_link(X, u), space, gauge, restarts, seed, budget), reps
        )
        entries = []
        for u, res in zip(reps, results):
            S_u = space.with_dim(len(res.witness[0])) if isinstance(space, LpSpace) else space
            entries.append({
                "vertex": u,
                "orbit_size": orb.orbit_size[0][(u,)],
                "lambda_variational": res.estimate,
                "label": res.label,
                "restarts": res.restarts,
                "skipped_degenerate": res.skipped,
                "witness": {str(v): S_u.point_to_json(x) for v, x in zip(cached_link(X, u).vertices, res.witness)},
            })
        values = [r.estimate for r in results]
    else:
        raise UnsupportedMethod(f"unknown method {method!r}")

    lam = min(values)
    C = X.weight_constant
    kappa = C / (2.0 * lam)
    orbit_check = _orbit_check(X, G, method, space, gauge, entries, results if method == "variational" else None)
    params = {"seed": seed, "gauge": gauge.to_dict()}
    if method == "variational":
        params.update(restarts=restarts, budget=budget, space=space.to_dict())
    return GapReport(
        method=method,
        weight_constant=C,
        entries=entries,
        global_lambda=lam,
        threshold=C / 2.0,
        kappa=kappa,
        verdict=bool(lam > C / 2.0),
        certifying=method == "spectral",
        orbit_check=orbit_check,
        params=params,
    )


def _orbit_check(X, G, method, space, gauge, entries, results):
    """Recompute the constant at one non-representative member of every orbit.

    Spectral: recomputed directly.  Variational: the witness is transported
    along the group element and its ratio re-evaluated on the image link.
    Returns None when the group acts trivially.
    """
    orb = G.orbits
    checks = []
    for i, e in enumerate(entries):
        u = e["vertex"]
        w = next((w for w in range(X.vertex_count) if w != u and orb.vertex_rep(w) == u), None)
        if w is None:
            continue
        if method == "spectral":
            there, here = lambda_spectral(cached_link(X, w)), e["lambda_spectral"]
        else:
            res = results[i]
            S = space.with_dim(len(res.witness[0])) if isinstance(space, LpSpace) else space
            vals = _transport(G, orb.transporter[w], cached_link(X, u), res.witness)
            num, den = link_ratio(cached_link(X, w), S, gauge, vals, certify=True)
            there, here = num / den, res.estimate
        checks.append({"vertex": u, "member": w, "difference": abs(there - here)})
    if not checks:
        return None
    worst = max(c["difference"] for c in checks)
    return {"checks": checks, "max_difference": worst, "passed": worst <= ORBIT_CHECK_ATOL}
