"""Finite weighted 2-dimensional simplicial complexes and finite group actions.

Simplices are stored unordered (sorted vertex tuples).  Sums over ordered
simplices are produced on demand by :func:`ordered_simplices`; an unordered
edge stands for 2 ordered ones and a triangle for 6.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DisconnectedLink,
    GroupTooLarge,
    InvalidComplex,
    InvariantViolation,
    NonPositiveWeight,
    NonPure,
    NotAutomorphism,
    UnknownVertex,
    WeightNotInvariant,
)

ADMISSIBILITY_RTOL = 1e-12
DEFAULT_GROUP_CAP = 10_000


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _connected(nodes: Sequence[int], edges: Iterable[tuple[int, int]]) -> bool:
    if not nodes:
        return False
    adj: dict[int, list[int]] = {v: [] for v in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(nodes)


@dataclass(frozen=True, eq=False)
class WeightedComplex:
    """Pure 2-dimensional complex with an admissible weight.

    ``triangle_weight`` and ``edge_weight`` are keyed by sorted vertex tuples.
    Admissibility: for every edge ``e``, the weights of the triangles
    containing ``e`` sum to ``weight_constant * edge_weight[e]``.
    """

    vertex_count: int
    triangles: tuple[tuple[int, int, int], ...]
    triangle_weight: dict
    edge_weight: dict
    weight_constant: float = 1.0
    _star: dict = field(init=False, repr=False)

    def __post_init__(self):
        star: dict[int, list] = {v: [] for v in range(self.vertex_count)}
        for t in self.triangles:
            for v in t:
                star[v].append(t)
        object.__setattr__(self, "_star", star)

    @property
    def vertices(self) -> range:
        return range(self.vertex_count)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.edge_weight))

    def triangles_at(self, u: int) -> list:
        if u not in self._star:
            raise UnknownVertex(f"vertex {u} not in complex")
        return self._star[u]

    def neighbors(self, u: int) -> list[int]:
        return sorted({v for t in self.triangles_at(u) for v in t if v != u})

    def weight(self, simplex: Sequence[int]) -> float:
        """Weight of an ordered or unordered edge/triangle."""
        key = tuple(sorted(simplex))
        if len(key) == 2:
            return self.edge_weight[key]
        if len(key) == 3:
            return self.triangle_weight[key]
        raise ValueError("weights live on edges and triangles only")

    def admissibility_residual(self) -> float:
        """Largest relative defect of the edge/triangle weight balance."""
        sums = dict.fromkeys(self.edge_weight, 0.0)
        for t, w in self.triangle_weight.items():
            for a, b in itertools.combinations(t, 2):
                sums[(a, b)] += w
        worst = 0.0
        for e, s in sums.items():
            target = self.weight_constant * self.edge_weight[e]
            worst = max(worst, abs(s - target) / target)
        return worst

    def min_edge_weight(self) -> float:
        return min(self.edge_weight.values())


def ordered_simplices(X: WeightedComplex, k: int) -> list[tuple[int, ...]]:
    """All ordered k-simplices, sorted."""
    if k == 0:
        return [(v,) for v in X.vertices]
    if k == 1:
        return sorted(p for e in X.edges for p in (e, e[::-1]))
    if k == 2:
        return sorted(p for t in X.triangles for p in itertools.permutations(t))
    raise ValueError("k must be 0, 1 or 2")


def build_complex(
    triples: Sequence[Sequence[int]],
    triangle_weights: Sequence[float] | dict | None = None,
    vertex_count: int | None = None,
    extra_edges: Sequence[Sequence[int]] | None = None,
) -> WeightedComplex:
    """Build a weighted complex from a triangle list.

    Without weights every triangle gets weight 1 (the standard weight).  Edge
    weights are always derived as the sum of the incident triangle weights, so
    the returned complex has ``weight_constant == 1``.

    ``extra_edges`` exists only to let input files describe edges explicitly;
    any of them not covered by a triangle makes the complex impure.
    """
    if len(triples) == 0:
        raise InvalidComplex("no triangles given")
    tris: list[tuple[int, int, int]] = []
    for raw in triples:
        if len(raw) != 3:
            raise InvalidComplex(f"not a triple: {raw!r}")
        t = tuple(sorted(int(v) for v in raw))
        if t[0] < 0 or len(set(t)) != 3:
            raise InvalidComplex(f"degenerate triangle {raw!r}")
        tris.append(t)
    if len(set(tris)) != len(tris):
        raise InvalidComplex("duplicate triangle")

    if triangle_weights is None:
        tw = {t: 1.0 for t in tris}
    elif isinstance(triangle_weights, dict):
        tw = {tuple(sorted(k)): float(v) for k, v in triangle_weights.items()}
        if set(tw) != set(tris):
            raise InvalidComplex("triangle weights do not match triangles")
    else:
        if len(triangle_weights) != len(tris):
            raise InvalidComplex("triangle_weights must be parallel to triangles")
        tw = {t: float(w) for t, w in zip(tris, triangle_weights)}
    for t, w in tw.items():
        if not (w > 0 and math.isfinite(w)):
            raise NonPositiveWeight(f"triangle {t} has weight {w}")

    used = {v for t in tris for v in t}
    n = max(used) + 1 if vertex_count is None else int(vertex_count)
    if max(used) >= n:
        raise InvalidComplex(f"vertex id {max(used)} out of range for {n} vertices")
    missing = sorted(set(range(n)) - used)
    if missing:
        raise NonPure(f"vertices {missing} lie in no triangle")

    ew: dict[tuple[int, int], float] = {}
    for t in tris:
        for a, b in itertools.combinations(t, 2):
            ew[(a, b)] = ew.get((a, b), 0.0) + tw[t]
    for raw in extra_edges or ():
        a, b = (int(v) for v in raw)
        if a == b:
            raise InvalidComplex(f"degenerate edge {raw!r}")
        if _edge(a, b) not in ew:
            raise NonPure(f"edge {_edge(a, b)} lies in no triangle")

    X = WeightedComplex(n, tuple(sorted(tris)), tw, dict(sorted(ew.items())), 1.0)
    for u in X.vertices:
        L = link_of(X, u)
        if not _connected(L.vertices, L.edges):
            raise DisconnectedLink(u)
    return X


def rescale_weights(X: WeightedComplex, target_C: float) -> WeightedComplex:
    """Rescale edge weights so the weight constant becomes ``target_C``."""
    if not target_C > 0:
        raise ValueError("target_C must be positive")
    if target_C == X.weight_constant:
        return X
    factor = X.weight_constant / target_C
    ew = {e: w * factor for e, w in X.edge_weight.items()}
    Y = WeightedComplex(X.vertex_count, X.triangles, dict(X.triangle_weight), ew, float(target_C))
    if Y.admissibility_residual() > ADMISSIBILITY_RTOL:
        raise InvalidComplex("rescaled weight is not admissible")
    return Y


@dataclass(frozen=True, eq=False)
class LinkGraph:
    """Weighted link of a vertex: a graph on the neighbours of ``center``."""

    center: int
    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    vertex_weight: dict
    edge_weight: dict
    weight_constant: float

    def __len__(self):
        return len(self.vertices)

    def adjacency(self) -> np.ndarray:
        idx = {v: i for i, v in enumerate(self.vertices)}
        A = np.zeros((len(self.vertices), len(self.vertices)))
        for (v, w), m in self.edge_weight.items():
            A[idx[v], idx[w]] = A[idx[w], idx[v]] = m
        return A

    def degree_residual(self) -> float:
        """Largest relative defect of sum_w m_u(vw) = C * m_u(v)."""
        deg = self.adjacency().sum(axis=1)
        target = self.weight_constant * np.array([self.vertex_weight[v] for v in self.vertices])
        return float(np.max(np.abs(deg - target) / target))

    def is_connected(self) -> bool:
        return _connected(self.vertices, self.edges)


def link_of(X: WeightedComplex, u: int) -> LinkGraph:
    if not 0 <= u < X.vertex_count:
        raise UnknownVertex(f"vertex {u} not in complex")
    verts = X.neighbors(u)
    edges = {}
    for t in X.triangles_at(u):
        v, w = (x for x in t if x != u)
        edges[_edge(v, w)] = X.triangle_weight[t]
    return LinkGraph(
        center=u,
        vertices=tuple(verts),
        edges=tuple(sorted(edges)),
        vertex_weight={v: X.edge_weight[_edge(u, v)] for v in verts},
        edge_weight=dict(sorted(edges.items())),
        weight_constant=X.weight_constant,
    )


# ---------------------------------------------------------------------------
# group actions


def _compose(g: tuple[int, ...], h: tuple[int, ...]) -> tuple[int, ...]:
    """g after h."""
    return tuple(g[i] for i in h)


@dataclass(frozen=True, eq=False)
class GroupAction:
    """Finite group of simplicial automorphisms, enumerated from generators.

    ``elements[0]`` is the identity.  ``words[i] = (j, g)`` records
    ``elements[i] = generators[g] o elements[j]`` so representations can be
    built along the same spanning tree.
    """

    complex: WeightedComplex
    generators: tuple[tuple[int, ...], ...]
    elements: tuple[tuple[int, ...], ...]
    words: tuple
    index: dict

    @property
    def order(self) -> int:
        return len(self.elements)

    def act(self, g: int | tuple, simplex: Sequence[int]) -> tuple[int, ...]:
        perm = self.elements[g] if isinstance(g, int) else g
        return tuple(perm[v] for v in simplex)

    def product(self, i: int, j: int) -> int:
        """Index of elements[i] o elements[j]."""
        return self.index[_compose(self.elements[i], self.elements[j])]

    @cached_property
    def orbits(self) -> "OrbitData":
        return orbit_data(self.complex, self)


def build_action(
    X: WeightedComplex,
    generators: Sequence[Sequence[int]] = (),
    cap: int = DEFAULT_GROUP_CAP,
) -> GroupAction:
    n = X.vertex_count
    gens = []
    tri_set = set(X.triangles)
    for raw in generators:
        g = tuple(int(v) for v in raw)
        if sorted(g) != list(range(n)):
            raise NotAutomorphism(f"generator {raw!r} is not a permutation of {n} vertices")
        for t in X.triangles:
            img = tuple(sorted(g[v] for v in t))
            if img not in tri_set:
                raise NotAutomorphism(f"generator {raw!r} maps triangle {t} to non-triangle {img}")
            if not math.isclose(X.triangle_weight[img], X.triangle_weight[t], rel_tol=1e-12):
                raise WeightNotInvariant(f"triangle weight not preserved on {t}")
        for e, w in X.edge_weight.items():
            if not math.isclose(X.edge_weight[_edge(g[e[0]], g[e[1]])], w, rel_tol=1e-12):
                raise WeightNotInvariant(f"edge weight not preserved on {e}")
        gens.append(g)

    identity = tuple(range(n))
    elements = [identity]
    words: list = [None]
    index = {identity: 0}
    queue = deque([0])
    while queue:
        j = queue.popleft()
        for gi, g in enumerate(gens):
            new = _compose(g, elements[j])
            if new not in index:
                if len(elements) >= cap:
                    raise GroupTooLarge(f"group closure exceeds {cap} elements")
                index[new] = len(elements)
                elements.append(new)
                words.append((j, gi))
                queue.append(index[new])
    return GroupAction(X, tuple(gens), tuple(elements), tuple(words), index)


@dataclass(frozen=True, eq=False)
class OrbitData:
    """Orbit representatives and point-wise stabilizer orders, k = 0, 1, 2.

    ``representatives[k]`` lists the lexicographically smallest ordered
    simplex of each orbit; ``stabilizer[k][rep]`` is the number of group
    elements fixing ``rep`` vertex by vertex; ``rep_of[k][s]`` maps every
    ordered simplex to its representative.  ``transporter[w]`` is the index of
    the first group element carrying ``rep_of[0][(w,)]`` to ``w``.
    """

    representatives: tuple
    stabilizer: tuple
    orbit_size: tuple
    rep_of: tuple
    transporter: dict

    def vertex_reps(self) -> list[int]:
        return [s[0] for s in self.representatives[0]]

    def vertex_stabilizer(self, u: int) -> int:
        return self.stabilizer[0][(u,)]

    def vertex_rep(self, w: int) -> int:
        return self.rep_of[0][(w,)][0]


def orbit_data(X: WeightedComplex, G: GroupAction) -> OrbitData:
    reps, stabs, sizes, rep_of = [], [], [], []
    transporter: dict[int, int] = {}
    for k in range(3):
        simplices = ordered_simplices(X, k)
        r_list, st, sz, rmap = [], {}, {}, {}
        for s in simplices:
            if s in rmap:
                continue
            orbit = [G.act(g, s) for g in G.elements]
            rep = min(orbit)
            members = set(orbit)
            r_list.append(rep)
            st[rep] = sum(1 for img in orbit if img == rep)
            sz[rep] = len(members)
            for m in members:
                rmap[m] = rep
            if k == 0:
                for gi, img in enumerate(G.act(g, rep) for g in G.elements):
                    transporter.setdefault(img[0], gi)
        r_list.sort()
        reps.append(tuple(r_list))
        stabs.append(st)
        sizes.append(sz)
        rep_of.append(rmap)
    return OrbitData(tuple(reps), tuple(stabs), tuple(sizes), tuple(rep_of), transporter)


def _pairs(X: WeightedComplex, l: int, k: int) -> list[tuple[tuple, tuple]]:
    out = []
    for sigma in ordered_simplices(X, k):
        for tau in itertools.permutations(sigma, l + 1):
            out.append((tau, sigma))
    return out


def check_orbit_identity(
    X: WeightedComplex,
    G: GroupAction,
    pair_function: Callable[[tuple, tuple], float],
    l: int = 0,
    k: int = 1,
    check_invariance: bool = True,
) -> tuple[float, float]:
    """Both sides of the orbit-sum exchange identity.

    Returns ``(sum over k-simplex representatives, sum over l-simplex
    representatives)``, each weighted by the inverse stabilizer order.
    """
    if not 0 <= l < k <= 2:
        raise ValueError("need 0 <= l < k <= 2")
    orb = G.orbits
    pairs = _pairs(X, l, k)
    if check_invariance:
        for tau, sigma in pairs:
            val = pair_function(tau, sigma)
            for g in G.generators:
                other = pair_function(G.act(g, tau), G.act(g, sigma))
                if not math.isclose(val, other, rel_tol=1e-12, abs_tol=1e-300):
                    raise InvariantViolation(f"pair function not invariant at {(tau, sigma)}")

    lhs = 0.0
    for sigma in orb.representatives[k]:
        inner = sum(pair_function(tau, sigma) for tau in itertools.permutations(sigma, l + 1))
        lhs += inner / orb.stabilizer[k][sigma]
    by_tau: dict[tuple, list] = {}
    for tau, sigma in pairs:
        by_tau.setdefault(tau, []).append(sigma)
    rhs = 0.0
    for tau in orb.representatives[l]:
        inner = sum(pair_function(tau, sigma) for sigma in by_tau.get(tau, ()))
        rhs += inner / orb.stabilizer[l][tau]
    return lhs, rhs


def random_invariant_pair_function(
    X: WeightedComplex, G: GroupAction, l: int, k: int, rng: np.random.Generator, integer: bool = False
) -> Callable[[tuple, tuple], float]:
    """A pair function constant on group orbits of (tau, sigma) pairs."""
    table: dict = {}
    for pair in _pairs(X, l, k):
        if pair in table:
            continue
        val = float(rng.integers(1, 10)) if integer else float(rng.uniform(0.1, 2.0))
        for g in G.elements:
            table[(G.act(g, pair[0]), G.act(g, pair[1]))] = val
    return lambda tau, sigma: table[(tuple(tau), tuple(sigma))]


# ---------------------------------------------------------------------------
# JSON input


def complex_from_dict(data: dict) -> tuple[WeightedComplex, list[list[int]]]:
    """Parse the complex JSON format; returns the complex and raw generators."""
    if "triangles" not in data:
        raise KeyError("complex description needs 'triangles'")
    X = build_complex(
        data["triangles"],
        data.get("triangle_weights"),
        vertex_count=data.get("vertices"),
        extra_edges=data.get("edges"),
    )
    gens = [list(map(int, g)) for g in data.get("generators", [])]
    return X, gens


def complex_to_dict(X: WeightedComplex, generators: Sequence[Sequence[int]] = ()) -> dict:
    out = {
        "vertices": X.vertex_count,
        "triangles": [list(t) for t in X.triangles],
        "triangle_weights": [X.triangle_weight[t] for t in X.triangles],
    }
    if generators:
        out["generators"] = [list(g) for g in generators]
    return out


def load_complex(path) -> tuple[WeightedComplex, list[list[int]]]:
    with open(path) as fh:
        return complex_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# reference complexes

OCTAHEDRON_ANTIPODAL = (1, 0, 3, 2, 5, 4)
TETRAHEDRON_ROTATION = (1, 2, 0, 3)


def octahedron() -> WeightedComplex:
    """Boundary of the octahedron; antipodal pairs are (0,1), (2,3), (4,5)."""
    return build_complex([(a, b, c) for a in (0, 1) for b in (2, 3) for c in (4, 5)])


def tetrahedron_boundary() -> WeightedComplex:
    return build_complex(list(itertools.combinations(range(4), 3)))


def single_triangle() -> WeightedComplex:
    return build_complex([(0, 1, 2)])


def flat_torus(n: int = 4) -> WeightedComplex:
    """Regular 6-valent triangulation of the n-by-n torus (n >= 3)."""
    if n < 3:
        raise ValueError("need n >= 3 for a simplicial torus")

    def vid(i, j):
        return (i % n) * n + (j % n)

    tris = []
    for i in range(n):
        for j in range(n):
            tris.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            tris.append((vid(i, j), vid(i, j + 1), vid(i + 1, j + 1)))
    return build_complex(tris)
