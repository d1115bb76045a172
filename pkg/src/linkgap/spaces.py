"""Target metric spaces: Euclidean, finite-dimensional l^p and finite metric trees.

All three expose the same small surface used by the rest of the package:
``distance``, ``combine`` (the point at fraction ``t`` of the way from ``x``
to ``y``), ``midpoint``, random sampling, local perturbations, isometries and
JSON payloads.  ``combine(x, y, 0) == x``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Any, Sequence

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import GraphMatcher

from .errors import DimensionMismatch, ForeignPoint, ParameterOutOfRange

P_RANGE = (1.1, 10.0)


class Space:
    kind: str = "abstract"
    is_vector = False

    def midpoint(self, x, y):
        return self.combine(x, y, 0.5)

    def distances(self, xs: Sequence, y) -> np.ndarray:
        return np.array([self.distance(x, y) for x in xs])

    def diameter(self, xs: Sequence) -> float:
        return max((self.distance(a, b) for a, b in itertools.combinations(xs, 2)), default=0.0)

    def distance_slope(self, x, y, z) -> float:
        """One-sided rate of change of d(., z) when leaving x towards y, per
        unit length travelled.  Generic version: a forward difference."""
        dxy = self.distance(x, y)
        t = min(1.0, 1e-8)
        return (self.distance(self.combine(x, y, t), z) - self.distance(x, z)) / (t * dxy)

    def _check_t(self, t):
        if not 0.0 <= t <= 1.0:
            raise ParameterOutOfRange(f"geodesic parameter {t} outside [0, 1]")


# ---------------------------------------------------------------------------
# vector spaces


@dataclass(frozen=True)
class AffineIsometry:
    """x -> signs * x[perm] + shift  (a signed permutation plus a translation)."""

    perm: tuple[int, ...]
    signs: tuple[float, ...]
    shift: tuple[float, ...]

    @classmethod
    def identity(cls, dim: int) -> "AffineIsometry":
        return cls(tuple(range(dim)), (1.0,) * dim, (0.0,) * dim)

    @cached_property
    def _arrays(self):
        return np.array(self.perm), np.array(self.signs), np.array(self.shift)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        p, s, b = self._arrays
        return s * np.asarray(x)[..., p] + b

    def compose(self, other: "AffineIsometry") -> "AffineIsometry":
        """self o other."""
        p, s, b = self._arrays
        q, r, c = other._arrays
        return AffineIsometry(
            tuple(int(i) for i in q[p]), tuple(s * r[p]), tuple(s * c[p] + b)
        )

    def inverse(self) -> "AffineIsometry":
        p, s, b = self._arrays
        inv = np.empty_like(p)
        inv[p] = np.arange(len(p))
        return AffineIsometry(tuple(int(i) for i in inv), tuple(s[inv]), tuple(-(s * b)[inv]))

    def allclose(self, other: "AffineIsometry", atol: float = 1e-12) -> bool:
        return (
            self.perm == other.perm
            and self.signs == other.signs
            and np.allclose(self.shift, other.shift, rtol=0, atol=atol)
        )

    def to_dict(self) -> dict:
        return {"perm": list(self.perm), "signs": list(self.signs), "shift": list(self.shift)}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineIsometry":
        dim = len(d["perm"])
        signs = d.get("signs", [1.0] * dim)
        shift = d.get("shift", [0.0] * dim)
        if sorted(d["perm"]) != list(range(dim)) or any(abs(s) != 1 for s in signs):
            raise ValueError("isometry payload must be a signed permutation")
        if len(signs) != dim or len(shift) != dim:
            raise DimensionMismatch("isometry payload has inconsistent lengths")
        return cls(tuple(int(i) for i in d["perm"]), tuple(float(s) for s in signs), tuple(float(b) for b in shift))


@dataclass(frozen=True)
class LpSpace(Space):
    """R^dim with the p-norm, 1 < p < inf; geodesics are affine segments."""

    dim: int
    p: float = 2.0
    kind: str = field(default="lp", init=False)
    is_vector = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.kind == "lp" and not P_RANGE[0] <= self.p <= P_RANGE[1]:
            raise ValueError(f"p must lie in {P_RANGE}")

    def check(self, x) -> np.ndarray:
        if isinstance(x, TreePoint):
            raise ForeignPoint("tree point given to a vector space")
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"expected shape ({self.dim},), got {x.shape}")
        return x

    def norm(self, v: np.ndarray, axis=None):
        if self.p == 2.0:
            return np.linalg.norm(v, axis=axis)
        return np.sum(np.abs(v) ** self.p, axis=axis) ** (1.0 / self.p)

    def distance(self, x, y) -> float:
        return float(self.norm(self.check(x) - self.check(y)))

    def distances(self, xs, y) -> np.ndarray:
        return self.norm(np.asarray(xs, dtype=float) - np.asarray(y, dtype=float), axis=-1)

    def diameter(self, xs) -> float:
        xs = np.asarray(xs, dtype=float)
        if len(xs) < 2:
            return 0.0
        return float(np.max(self.norm(xs[:, None, :] - xs[None, :, :], axis=-1)))

    def combine(self, x, y, t: float) -> np.ndarray:
        self._check_t(t)
        x, y = self.check(x), self.check(y)
        return (1.0 - t) * x + t * y

    def midpoint(self, x, y):
        return 0.5 * (self.check(x) + self.check(y))

    def distance_slope(self, x, y, z) -> float:
        """Directional derivative of the p-norm, exact."""
        x, y, z = self.check(x), self.check(y), self.check(z)
        u = y - x
        u = u / self.norm(u)
        r = x - z
        nr = self.norm(r)
        if nr == 0.0:
            return 1.0
        if self.p == 2.0:
            return float(r @ u / nr)
        return float((np.sign(r) * (np.abs(r) / nr) ** (self.p - 1.0)) @ u)

    def random_point(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return scale * rng.standard_normal(self.dim)

    def perturbations(self, x: np.ndarray, h: float) -> list[np.ndarray]:
        out = []
        for i in range(self.dim):
            for s in (h, -h):
                y = x.copy()
                y[i] += s
                out.append(y)
        return out

    def identity(self) -> AffineIsometry:
        return AffineIsometry.identity(self.dim)

    def random_isometry(self, rng: np.random.Generator, scale: float = 1.0) -> AffineIsometry:
        return AffineIsometry(
            tuple(int(i) for i in rng.permutation(self.dim)),
            tuple(float(s) for s in rng.choice([-1.0, 1.0], self.dim)),
            tuple(float(b) for b in scale * rng.standard_normal(self.dim)),
        )

    def isometry_from_dict(self, d: dict) -> AffineIsometry:
        iso = AffineIsometry.from_dict(d)
        if len(iso.perm) != self.dim:
            raise DimensionMismatch("isometry dimension does not match space")
        return iso

    def point_to_json(self, x) -> list[float]:
        return [float(v) for v in self.check(x)]

    def point_from_json(self, payload) -> np.ndarray:
        return self.check(payload)

    def with_dim(self, dim: int) -> "LpSpace":
        return type(self)(dim, self.p) if self.kind == "lp" else type(self)(dim)

    def to_dict(self) -> dict:
        return {"kind": "lp", "dim": self.dim, "p": self.p}


@dataclass(frozen=True)
class Euclidean(LpSpace):
    p: float = field(default=2.0, init=False)
    kind: str = field(default="euclidean", init=False)

    def with_dim(self, dim: int) -> "Euclidean":
        return Euclidean(dim)

    def to_dict(self) -> dict:
        return {"kind": "euclidean", "dim": self.dim}


# ---------------------------------------------------------------------------
# metric trees


@dataclass(frozen=True)
class TreePoint:
    """A point on edge ``edge`` at distance ``offset`` from the edge's first end."""

    edge: int
    offset: float


@dataclass(frozen=True)
class TreeAutomorphism:
    """Vertex permutation of a metric tree preserving edges and their lengths."""

    perm: tuple[int, ...]

    tree: "MetricTree" = field(compare=False, repr=False, default=None)

    def __call__(self, x: TreePoint) -> TreePoint:
        a, b, L = self.tree.edges[x.edge]
        ia, ib = self.perm[a], self.perm[b]
        e = self.tree.edge_index[(min(ia, ib), max(ia, ib))]
        if self.tree.edges[e][0] == ia:
            return self.tree.canonical(TreePoint(e, x.offset))
        return self.tree.canonical(TreePoint(e, L - x.offset))

    def compose(self, other: "TreeAutomorphism") -> "TreeAutomorphism":
        return TreeAutomorphism(tuple(self.perm[i] for i in other.perm), self.tree)

    def inverse(self) -> "TreeAutomorphism":
        inv = [0] * len(self.perm)
        for i, j in enumerate(self.perm):
            inv[j] = i
        return TreeAutomorphism(tuple(inv), self.tree)

    def allclose(self, other: "TreeAutomorphism", atol: float = 0.0) -> bool:
        return self.perm == other.perm

    def to_dict(self) -> dict:
        return {"perm": list(self.perm)}


class MetricTree(Space):
    """Finite tree with positive edge lengths, viewed as a geodesic metric space.

    Points are ``TreePoint(edge, offset)``; a vertex is stored on its
    lowest-index incident edge.
    """

    kind = "tree"

    def __init__(self, edges: Sequence[Sequence[float]]):
        es = []
        for a, b, L in edges:
            a, b, L = int(a), int(b), float(L)
            if a == b or not L > 0:
                raise ValueError(f"bad tree edge {(a, b, L)}")
            es.append((a, b, L))
        nv = max(max(a, b) for a, b, _ in es) + 1
        g = nx.Graph()
        g.add_nodes_from(range(nv))
        for i, (a, b, L) in enumerate(es):
            g.add_edge(a, b, length=L, index=i)
        if len(es) != nv - 1 or not nx.is_connected(g):
            raise ValueError("edges do not form a tree")
        self.edges = tuple(es)
        self.vertex_count = nv
        self.graph = g
        self.edge_index = {(min(a, b), max(a, b)): i for i, (a, b, _) in enumerate(es)}
        D = np.zeros((nv, nv))
        nxt = np.zeros((nv, nv), dtype=int)
        for s, paths in nx.all_pairs_dijkstra_path(g, weight="length"):
            for t, path in paths.items():
                D[s, t] = sum(g[path[i]][path[i + 1]]["length"] for i in range(len(path) - 1))
                nxt[s, t] = path[1] if len(path) > 1 else s
        self.D = D
        self.next_hop = nxt
        self._home = {}
        for v in range(nv):
            # lowest-index incident edge
            i = min(g[v][w]["index"] for w in g[v])
            self._home[v] = (i, 0.0 if es[i][0] == v else es[i][2])

    def __repr__(self):
        return f"MetricTree({[list(e) for e in self.edges]})"

    def __eq__(self, other):
        return isinstance(other, MetricTree) and self.edges == other.edges

    def __hash__(self):
        return hash(self.edges)

    # points -----------------------------------------------------------
    def vertex(self, v: int) -> TreePoint:
        return TreePoint(*self._home[v])

    def canonical(self, x: TreePoint) -> TreePoint:
        a, b, L = self.edges[x.edge]
        if x.offset <= 0.0:
            return self.vertex(a)
        if x.offset >= L:
            return self.vertex(b)
        return x

    def check(self, x) -> TreePoint:
        if not isinstance(x, TreePoint):
            raise ForeignPoint(f"{x!r} is not a tree point")
        if not 0 <= x.edge < len(self.edges):
            raise ForeignPoint(f"edge {x.edge} not in tree")
        if not -1e-12 <= x.offset <= self.edges[x.edge][2] + 1e-12:
            raise ForeignPoint(f"offset {x.offset} outside edge {x.edge}")
        return x

    def to_vertices(self, x: TreePoint) -> np.ndarray:
        """Distances from ``x`` to every tree vertex."""
        a, b, L = self.edges[x.edge]
        return np.minimum(x.offset + self.D[a], (L - x.offset) + self.D[b])

    def _ends(self, x: TreePoint):
        a, b, L = self.edges[x.edge]
        return ((a, x.offset), (b, L - x.offset))

    def _route(self, x: TreePoint, y: TreePoint):
        best = None
        for (u, du) in self._ends(x):
            for (v, dv) in self._ends(y):
                tot = du + self.D[u, v] + dv
                if best is None or tot < best[0]:
                    best = (tot, u, du, v, dv)
        return best

    def distance(self, x, y) -> float:
        x, y = self.check(x), self.check(y)
        if x.edge == y.edge:
            return abs(x.offset - y.offset)
        return float(self._route(x, y)[0])

    def distances(self, xs, y) -> np.ndarray:
        return np.array([self.distance(x, y) for x in xs])

    def distance_slope(self, x, y, z) -> float:
        """-1 if the geodesics from x to y and to z share an initial segment
        (positive Gromov product at x), else +1."""
        dxy, dxz = self.distance(x, y), self.distance(x, z)
        if dxz == 0.0:
            return 1.0
        gromov = 0.5 * (dxy + dxz - self.distance(y, z))
        return -1.0 if gromov > 1e-12 * (dxy + dxz) else 1.0

    def _point_on(self, u: int, v: int, s: float) -> TreePoint:
        """Point at distance s from vertex u along the tree edge {u, v}."""
        e = self.edge_index[(min(u, v), max(u, v))]
        a, b, L = self.edges[e]
        return self.canonical(TreePoint(e, s if a == u else L - s))

    def combine(self, x, y, t: float) -> TreePoint:
        self._check_t(t)
        x, y = self.check(x), self.check(y)
        if x.edge == y.edge:
            return self.canonical(TreePoint(x.edge, (1 - t) * x.offset + t * y.offset))
        total, u, du, v, dv = self._route(x, y)
        r = t * total
        a, b, L = self.edges[x.edge]
        if r <= du:
            return self.canonical(TreePoint(x.edge, x.offset - r if u == a else x.offset + r))
        r -= du
        cur = u
        while cur != v:
            nxt = int(self.next_hop[cur, v])
            length = self.D[cur, nxt]
            if r <= length:
                return self._point_on(cur, nxt, r)
            r -= length
            cur = nxt
        a2, b2, L2 = self.edges[y.edge]
        r = min(r, dv)
        return self.canonical(TreePoint(y.edge, r if v == a2 else L2 - r))

    def random_point(self, rng: np.random.Generator, scale: float = 1.0) -> TreePoint:
        lengths = np.array([L for *_, L in self.edges])
        e = int(rng.choice(len(self.edges), p=lengths / lengths.sum()))
        return self.canonical(TreePoint(e, float(rng.uniform(0, self.edges[e][2]))))

    def perturbations(self, x: TreePoint, h: float) -> list[TreePoint]:
        """Points at distance <= h from x in every direction."""
        a, b, L = self.edges[x.edge]
        if 0.0 < x.offset < L:
            return [
                self.canonical(TreePoint(x.edge, max(0.0, x.offset - h))),
                self.canonical(TreePoint(x.edge, min(L, x.offset + h))),
            ]
        v = a if x.offset <= 0.0 else b
        return [self._point_on(v, w, min(h, self.D[v, w])) for w in sorted(self.graph[v])]

    # isometries --------------------------------------------------------
    def identity(self) -> TreeAutomorphism:
        return TreeAutomorphism(tuple(range(self.vertex_count)), self)

    def automorphism(self, perm: Sequence[int]) -> TreeAutomorphism:
        perm = tuple(int(i) for i in perm)
        if sorted(perm) != list(range(self.vertex_count)):
            raise ValueError("not a permutation of tree vertices")
        for a, b, L in self.edges:
            key = (min(perm[a], perm[b]), max(perm[a], perm[b]))
            if key not in self.edge_index or self.edges[self.edge_index[key]][2] != L:
                raise ValueError(f"permutation does not preserve edge {(a, b, L)}")
        return TreeAutomorphism(perm, self)

    @cached_property
    def automorphisms(self) -> tuple[TreeAutomorphism, ...]:
        gm = GraphMatcher(self.graph, self.graph, edge_match=lambda e1, e2: e1["length"] == e2["length"])
        perms = sorted(tuple(m[i] for i in range(self.vertex_count)) for m in gm.isomorphisms_iter())
        return tuple(TreeAutomorphism(p, self) for p in perms)

    def random_isometry(self, rng: np.random.Generator, scale: float = 1.0) -> TreeAutomorphism:
        autos = self.automorphisms
        return autos[int(rng.integers(len(autos)))]

    def isometry_from_dict(self, d: dict) -> TreeAutomorphism:
        return self.automorphism(d["perm"])

    def point_to_json(self, x) -> dict:
        x = self.check(x)
        return {"edge": x.edge, "offset": float(x.offset)}

    def point_from_json(self, payload) -> TreePoint:
        if isinstance(payload, int):
            return self.vertex(payload)
        return self.check(self.canonical(TreePoint(int(payload["edge"]), float(payload["offset"]))))

    def to_dict(self) -> dict:
        return {"kind": "tree", "tree": {"edges": [list(e) for e in self.edges]}}

    @classmethod
    def star(cls, legs: int = 3, length: float = 1.0) -> "MetricTree":
        return cls([(0, i, length) for i in range(1, legs + 1)])

    @classmethod
    def path(cls, n: int = 3, length: float = 1.0) -> "MetricTree":
        return cls([(i, i + 1, length) for i in range(n - 1)])


def space_from_dict(d: dict | str) -> Space:
    if isinstance(d, str):
        d = json.loads(d)
    kind = d.get("kind")
    if kind == "euclidean":
        return Euclidean(int(d["dim"]))
    if kind == "lp":
        return LpSpace(int(d["dim"]), float(d["p"]))
    if kind == "tree":
        return MetricTree(d["tree"]["edges"])
    raise ValueError(f"unknown space kind {kind!r}")


# ---------------------------------------------------------------------------
# axiom sampling

EPS_GRID = tuple(round(0.1 * i, 1) for i in range(1, 21))


@dataclass
class AxiomReport:
    """Worst sampled violation per axiom plus the empirical convexity modulus.

    ``theta_hat[i]`` is the smallest observed ``1 - d(mid(x, y), a) / r`` over
    sampled triples with ``d(x, y) >= EPS_GRID[i] * r``; ``None`` when no
    sample reached that separation.
    """

    space: dict
    trials: int
    seed: int
    violations: dict[str, float]
    theta_hat: list

    def worst(self) -> float:
        return max(self.violations.values())

    def passed(self, tol: float = 1e-12) -> bool:
        return self.worst() <= tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps_grid"] = list(EPS_GRID)
        return d


def sample_axioms(S: Space, trials: int = 10_000, seed: int = 0, isometries: Sequence | None = None) -> AxiomReport:
    """Sample random configurations and record the worst violation of each axiom.

    Checked: metric symmetry, zero self-distance, triangle inequality, the
    geodesic distance rule for ``combine``, the four-point midpoint
    (non-positive curvature) condition, convexity of ``d(., y)`` along
    geodesics, sub-geodesic consistency, and distance preservation and
    midpoint commutation for isometries.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    d, comb, mid = S.distance, S.combine, S.midpoint
    if isometries is None:
        isometries = [S.random_isometry(rng) for _ in range(8)]
    viol = dict.fromkeys(
        [
            "symmetry",
            "identity",
            "triangle",
            "geodesic",
            "busemann",
            "convexity",
            "subgeodesic",
            "isometry_distance",
            "isometry_midpoint",
        ],
        0.0,
    )
    ratios, thetas = [], []

    def bump(name, value):
        if value > viol[name]:
            viol[name] = float(value)

    for i in range(trials):
        x, y, z, w = (S.random_point(rng) for _ in range(4))
        t, s = rng.uniform(), rng.uniform()
        dxy = d(x, y)
        bump("symmetry", abs(dxy - d(y, x)))
        bump("identity", d(x, x))
        bump("triangle", d(x, z) - dxy - d(y, z))
        c = comb(x, y, t)
        bump("geodesic", max(abs(d(x, c) - t * dxy), abs(d(y, c) - (1 - t) * dxy)))
        bump("geodesic", d(comb(x, y, 0.0), x) + d(comb(x, y, 1.0), y))
        bump("busemann", d(mid(x, y), mid(z, w)) - 0.5 * d(x, w) - 0.5 * d(z, y))
        bump("convexity", d(c, z) - (1 - t) * d(x, z) - t * d(y, z))
        bump("subgeodesic", d(comb(x, y, s * t), comb(x, c, s)))
        T = isometries[i % len(isometries)]
        bump("isometry_distance", abs(d(T(x), T(y)) - dxy))
        bump("isometry_midpoint", d(T(mid(x, y)), mid(T(x), T(y))))

        # modulus of convexity: centre a near the midpoint of x, y so every
        # separation ratio in (0, 2] gets sampled
        m = mid(x, y)
        a = comb(m, z, float(rng.choice([0.0, rng.uniform() ** 3, rng.uniform()])))
        r = max(d(a, x), d(a, y))
        if r > 0:
            ratios.append(dxy / r)
            thetas.append(1.0 - d(m, a) / r)

    ratios, thetas = np.array(ratios), np.array(thetas)
    theta_hat = []
    for eps in EPS_GRID:
        sel = ratios >= eps * (1 - 1e-9)
        theta_hat.append(float(thetas[sel].min()) if sel.any() else None)
    return AxiomReport(S.to_dict(), trials, seed, viol, theta_hat)
