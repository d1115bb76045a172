import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from linkgap.errors import DimensionMismatch, ForeignPoint
from linkgap.spaces import (
    EPS_GRID,
    AffineIsometry,
    Euclidean,
    LpSpace,
    MetricTree,
    TreePoint,
    sample_axioms,
    space_from_dict,
)

SPACES = [Euclidean(3), LpSpace(3, 3.0), LpSpace(2, 1.5), MetricTree.star(3), MetricTree.path(4, 0.5)]
IDS = ["euclidean3", "l3", "l1.5", "star", "path"]

vec = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


def test_lp_distance_values():
    assert LpSpace(2, 3.0).distance([0, 0], [1, 1]) == pytest.approx(2 ** (1 / 3), rel=1e-15)
    assert Euclidean(2).distance([0, 0], [3, 4]) == 5.0


def test_lp_p_range():
    with pytest.raises(ValueError):
        LpSpace(2, 1.0)
    with pytest.raises(ValueError):
        LpSpace(2, 11.0)


def test_dimension_and_foreign_points():
    with pytest.raises(DimensionMismatch):
        Euclidean(3).distance([0, 0], [0, 0, 0])
    with pytest.raises(ForeignPoint):
        Euclidean(3).check(TreePoint(0, 0.0))
    with pytest.raises(ForeignPoint):
        MetricTree.star(3).check(np.zeros(3))


def test_tree_path_geometry():
    T = MetricTree.path(3)
    a, c = T.vertex(0), T.vertex(2)
    assert T.distance(a, c) == 2.0
    m = T.midpoint(a, c)
    assert T.distance(m, T.vertex(1)) == 0.0
    q = T.combine(a, c, 0.25)
    assert T.distance(a, q) == pytest.approx(0.5)


def test_tree_star_route_through_centre():
    T = MetricTree.star(3, 2.0)
    x = TreePoint(0, 1.0)  # halfway along leg 1
    y = TreePoint(1, 1.5)
    assert T.distance(x, y) == pytest.approx(1.0 + 1.5)
    m = T.combine(x, y, 0.4)  # exactly at the centre
    assert T.distance(m, T.vertex(0)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("S", SPACES, ids=IDS)
def test_axiom_samplers_clean(S):
    rep = sample_axioms(S, trials=2000, seed=3)
    assert rep.passed(1e-12), rep.violations


def test_axiom_report_fields():
    rep = sample_axioms(Euclidean(2), trials=500, seed=0)
    d = rep.to_dict()
    assert d["eps_grid"] == list(EPS_GRID) and len(d["theta_hat"]) == len(EPS_GRID)
    # Euclidean modulus: 1 - sqrt(1 - eps^2/4) at least
    for eps, th in zip(EPS_GRID, rep.theta_hat):
        if th is not None:
            assert th >= 1 - np.sqrt(max(0.0, 1 - eps**2 / 4)) - 1e-9


def test_axiom_sampler_deterministic():
    a = sample_axioms(LpSpace(3, 3.0), trials=300, seed=9)
    b = sample_axioms(LpSpace(3, 3.0), trials=300, seed=9)
    assert a.to_dict() == b.to_dict()


class _BentSpace(Euclidean):
    """R^dim with a wrong combine, to make sure the sampler notices."""

    def combine(self, x, y, t):
        return super().combine(x, y, t**2)


def test_axiom_sampler_catches_broken_geodesic():
    rep = sample_axioms(_BentSpace(2), trials=200, seed=0)
    assert rep.violations["geodesic"] > 1e-3


@given(x=vec, y=vec, seed=st.integers(0, 1000))
def test_signed_permutations_are_isometries(x, y, seed):
    S = LpSpace(3, 3.0)
    T = S.random_isometry(np.random.default_rng(seed))
    assert S.distance(T(x), T(y)) == pytest.approx(S.distance(x, y), rel=1e-12, abs=1e-12)
    # isometries fixing 0 are linear, so they are affine on midpoints
    assert np.allclose(T(S.midpoint(x, y)), S.midpoint(T(x), T(y)), atol=1e-12)


@given(seed=st.integers(0, 10_000))
def test_isometry_group_operations(seed):
    rng = np.random.default_rng(seed)
    S = Euclidean(3)
    A, B = S.random_isometry(rng), S.random_isometry(rng)
    x = rng.standard_normal(3)
    assert np.allclose(A.compose(B)(x), A(B(x)))
    assert np.allclose(A.inverse()(A(x)), x)
    assert A.compose(A.inverse()).allclose(AffineIsometry.identity(3))


def test_tree_automorphisms():
    T = MetricTree.star(3)
    assert len(T.automorphisms) == 6
    P = MetricTree.path(4)
    assert len(P.automorphisms) == 2
    flip = P.automorphism((3, 2, 1, 0))
    x = P.point_from_json({"edge": 0, "offset": 0.25})
    assert P.distance(flip(x), P.vertex(3)) == pytest.approx(0.25)


@pytest.mark.parametrize("S", SPACES, ids=IDS)
def test_point_json_roundtrip(S):
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = S.random_point(rng)
        y = S.point_from_json(S.point_to_json(x))
        assert S.distance(x, y) == 0.0


@pytest.mark.parametrize("S", SPACES, ids=IDS)
def test_space_json_roundtrip(S):
    assert space_from_dict(S.to_dict()) == S


@pytest.mark.parametrize("S", SPACES, ids=IDS)
def test_distance_slope_matches_difference_quotient(S):
    rng = np.random.default_rng(4)
    for _ in range(200):
        x, y, z = (S.random_point(rng) for _ in range(3))
        dxy = S.distance(x, y)
        if dxy < 1e-3 or S.distance(x, z) < 1e-3:
            continue
        h = 1e-7
        fd = (S.distance(S.combine(x, y, h), z) - S.distance(x, z)) / (h * dxy)
        assert S.distance_slope(x, y, z) == pytest.approx(fd, abs=1e-5)
