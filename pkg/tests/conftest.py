import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from linkgap.complex import (
    OCTAHEDRON_ANTIPODAL,
    TETRAHEDRON_ROTATION,
    build_action,
    octahedron,
    single_triangle,
    tetrahedron_boundary,
)
from linkgap.maps import Representation
from linkgap.spaces import AffineIsometry, Euclidean

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# -x on R^3 and the cyclic coordinate shift on R^3
NEGATION = AffineIsometry((0, 1, 2), (-1.0, -1.0, -1.0), (0.0, 0.0, 0.0))
CYCLIC = AffineIsometry((2, 0, 1), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0))


def golden_actions():
    """(name, action, representation on R^3) for the reference complexes."""
    out = []
    X = octahedron()
    out.append(("octahedron-trivial", build_action(X, []), None))
    out.append(("octahedron-antipodal", build_action(X, [OCTAHEDRON_ANTIPODAL]), [NEGATION]))
    T = tetrahedron_boundary()
    out.append(("tetrahedron-trivial", build_action(T, []), None))
    out.append(("tetrahedron-rotation", build_action(T, [TETRAHEDRON_ROTATION]), [CYCLIC]))
    out.append(("triangle-trivial", build_action(single_triangle(), []), None))
    return out


def rep_for(G, isos, S=None):
    S = S or Euclidean(3)
    return Representation.trivial(G, S) if isos is None else Representation(G, S, isos)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
