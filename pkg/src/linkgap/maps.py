"""Isometric representations of a group action and equivariant maps.

An :class:`EquivariantMap` is stored by its values on vertex-orbit
representatives; every other vertex gets ``phi(g.u) = rho(g) phi(u)``.
The full table of vertex values is materialised at construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .complex import GroupAction, WeightedComplex
from .errors import NotEquivariant, RepresentationMismatch, SpaceMismatch
from .spaces import LpSpace, Space

EQUIVARIANCE_ATOL = 1e-10


class Representation:
    """A homomorphism from the enumerated group into Isom(space).

    Built from one isometry per generator; the image of every element is
    composed along the words recorded by :func:`build_action` and the
    homomorphism property is checked on every (generator, element) pair.
    """

    def __init__(self, action: GroupAction, space: Space, generator_isometries: Sequence):
        if len(generator_isometries) != len(action.generators):
            raise RepresentationMismatch(
                f"{len(action.generators)} generators but {len(generator_isometries)} isometries"
            )
        self.action = action
        self.space = space
        self.generator_isometries = tuple(generator_isometries)
        isos = [space.identity()]
        for j, gi in action.words[1:]:
            isos.append(self.generator_isometries[gi].compose(isos[j]))
        self.isometries = tuple(isos)
        for gi, T in enumerate(self.generator_isometries):
            gidx = action.index[action.generators[gi]]
            for j in range(action.order):
                k = action.product(gidx, j)
                if not T.compose(isos[j]).allclose(isos[k]):
                    raise RepresentationMismatch("generator isometries do not define a homomorphism")

    @classmethod
    def trivial(cls, action: GroupAction, space: Space) -> "Representation":
        return cls(action, space, [space.identity() for _ in action.generators])

    def __call__(self, element: int):
        return self.isometries[element]

    def same_as(self, other: "Representation") -> bool:
        if other is self:
            return True
        return (
            other.action is self.action
            and other.space == self.space
            and all(a.allclose(b) for a, b in zip(self.generator_isometries, other.generator_isometries))
        )

    def fixed_defect(self, z) -> float:
        """Largest displacement of ``z`` under the generator isometries."""
        d = self.space.distance
        return max((d(T(z), z) for T in self.generator_isometries), default=0.0)

    def to_dict(self) -> dict:
        return {"generators": [T.to_dict() for T in self.generator_isometries]}

    @classmethod
    def from_dict(cls, action: GroupAction, space: Space, d: dict) -> "Representation":
        return cls(action, space, [space.isometry_from_dict(g) for g in d.get("generators", [])])


@dataclass(frozen=True, eq=False)
class EquivariantMap:
    rep: Representation
    values: tuple

    @property
    def action(self) -> GroupAction:
        return self.rep.action

    @property
    def complex(self) -> WeightedComplex:
        return self.rep.action.complex

    @property
    def space(self) -> Space:
        return self.rep.space

    def __call__(self, v: int):
        return self.values[v]

    @classmethod
    def from_representatives(cls, rep: Representation, rep_values: dict, atol: float = EQUIVARIANCE_ATOL) -> "EquivariantMap":
        G = rep.action
        orb = G.orbits
        S = rep.space
        reps = orb.vertex_reps()
        if set(rep_values) != set(reps):
            raise ValueError(f"values must be given exactly on representatives {reps}")
        vals = {u: S.check(rep_values[u]) for u in reps}
        for u in reps:
            for gi, g in enumerate(G.elements):
                if g[u] == u and S.distance(rep(gi)(vals[u]), vals[u]) > atol:
                    raise NotEquivariant(f"value at {u} is not fixed by its stabilizer")
        full = []
        for w in range(G.complex.vertex_count):
            full.append(rep(orb.transporter[w])(vals[orb.vertex_rep(w)]))
        return cls(rep, tuple(full))

    @classmethod
    def constant(cls, rep: Representation, z) -> "EquivariantMap":
        return cls.from_representatives(rep, {u: z for u in rep.action.orbits.vertex_reps()})

    @classmethod
    def random(cls, rep: Representation, rng: np.random.Generator, scale: float = 1.0) -> "EquivariantMap":
        """Random values on representatives, projected onto stabilizer-fixed points."""
        G = rep.action
        S = rep.space
        vals = {}
        for u in G.orbits.vertex_reps():
            x = S.random_point(rng, scale)
            stab = [gi for gi, g in enumerate(G.elements) if g[u] == u]
            if len(stab) > 1:
                x = fixed_point_of(S, [rep(gi)(x) for gi in stab])
            vals[u] = x
        return cls.from_representatives(rep, vals)

    def rep_values(self) -> dict:
        return {u: self.values[u] for u in self.action.orbits.vertex_reps()}

    def with_rep_values(self, rep_values: dict) -> "EquivariantMap":
        return EquivariantMap.from_representatives(self.rep, rep_values)

    def midpoint(self, other: "EquivariantMap") -> "EquivariantMap":
        """Vertex-wise midpoint; equivariant because isometries preserve midpoints."""
        _same_rep(self, other)
        mid = self.space.midpoint
        return EquivariantMap(self.rep, tuple(mid(a, b) for a, b in zip(self.values, other.values)))

    def diameter(self) -> float:
        return self.space.diameter(list(self.values))

    def equivariance_residual(self) -> float:
        """max over elements g and vertices v of d(rho(g) phi(v), phi(g.v))."""
        d = self.space.distance
        worst = 0.0
        for gi, g in enumerate(self.action.elements):
            T = self.rep(gi)
            for v in range(len(self.values)):
                worst = max(worst, d(T(self.values[v]), self.values[g[v]]))
        return worst

    def to_dict(self) -> dict:
        return {
            "values": {str(u): self.space.point_to_json(x) for u, x in self.rep_values().items()},
            "representation": self.rep.to_dict(),
        }

    @classmethod
    def from_dict(cls, action: GroupAction, space: Space, d: dict) -> "EquivariantMap":
        if "representation" in d:
            rep = Representation.from_dict(action, space, d["representation"])
        else:
            rep = Representation.trivial(action, space)
        vals = {int(k): space.point_from_json(v) for k, v in d["values"].items()}
        return cls.from_representatives(rep, vals)


def _same_rep(phi: EquivariantMap, psi: EquivariantMap):
    if not phi.rep.same_as(psi.rep):
        raise RepresentationMismatch("maps use different representations")


def fixed_point_of(S: Space, orbit: list):
    """A point fixed by a finite isometry group, given the orbit of any point.

    Vector spaces: the average (isometries are affine).  Otherwise the
    squared-distance barycenter of the orbit, which is unique and hence fixed.
    """
    if isinstance(S, LpSpace):
        return np.mean(np.asarray(orbit, dtype=float), axis=0)
    from .energy import barycenter
    from .gauge import PowerGauge

    return barycenter(S, orbit, np.ones(len(orbit)), PowerGauge(2.0))
