"""Convexity gauges: strictly convex increasing f on [0, inf) with f(0) = 0.

Two families are supported: powers ``x**p`` (p > 1) and polynomials
``sum_j a_j x**j`` with integer exponents ``j >= 2`` and nonnegative
coefficients, at least one positive.
"""
from __future__ import annotations

import json
import math

import numpy as np

NEWTON_ITERATIONS = 60


class Gauge:
    def __call__(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    def inverse(self, y):
        raise NotImplementedError

    @property
    def lowest_degree(self) -> float:
        raise NotImplementedError

    @property
    def scale_invariant(self) -> bool:
        """True when f(c x) = c**p f(x), so energy ratios ignore scale."""
        return False

    def inverse_tail_sum(self, C: float, kappa: float, rtol: float = 1e-15, max_terms: int = 100_000) -> float:
        """sum_{k >= 1} f^{-1}(C kappa^k), stopped once terms fall below rtol * partial sum."""
        if not 0 <= kappa < 1 or C < 0:
            raise ValueError("need 0 <= kappa < 1 and C >= 0")
        total = 0.0
        for k in range(1, max_terms + 1):
            term = float(self.inverse(C * kappa**k))
            total += term
            if term <= rtol * total or term == 0.0:
                return total
        raise ArithmeticError("tail sum did not settle")


class PowerGauge(Gauge):
    def __init__(self, p: float = 2.0):
        if not p > 1:
            raise ValueError("power gauge needs p > 1")
        self.p = float(p)

    def __repr__(self):
        return f"PowerGauge({self.p:g})"

    def __eq__(self, other):
        return isinstance(other, PowerGauge) and other.p == self.p

    def __hash__(self):
        return hash(("power", self.p))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.p == 2.0:
            return x * x
        return x**self.p

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return self.p * x ** (self.p - 1.0)

    def inverse(self, y):
        return np.asarray(y, dtype=float) ** (1.0 / self.p)

    @property
    def lowest_degree(self) -> float:
        return self.p

    @property
    def scale_invariant(self) -> bool:
        return True

    def to_dict(self) -> dict:
        return {"kind": "power", "p": self.p}


class PolynomialGauge(Gauge):
    def __init__(self, coeffs: dict):
        cs = {int(k): float(v) for k, v in coeffs.items()}
        if not cs or any(k < 2 for k in cs) or any(v < 0 for v in cs.values()) or not any(v > 0 for v in cs.values()):
            raise ValueError("polynomial gauge needs exponents >= 2, coefficients >= 0, one positive")
        self.coeffs = {k: v for k, v in sorted(cs.items()) if v > 0}
        self._exp = np.array(list(self.coeffs), dtype=float)
        self._a = np.array(list(self.coeffs.values()))

    def __repr__(self):
        return f"PolynomialGauge({self.coeffs})"

    def __eq__(self, other):
        return isinstance(other, PolynomialGauge) and other.coeffs == self.coeffs

    def __hash__(self):
        return hash(("poly", tuple(self.coeffs.items())))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(self._a * x[..., None] ** self._exp, axis=-1)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(self._a * self._exp * x[..., None] ** (self._exp - 1.0), axis=-1)

    def _inverse_scalar(self, y: float) -> float:
        if y <= 0.0:
            return 0.0
        # bracket by doubling, then Newton from the upper end: for convex
        # increasing f the iterates decrease monotonically onto the root
        lo, hi = 0.0, 1.0
        while float(self(hi)) < y:
            lo, hi = hi, 2.0 * hi
        x = hi
        for _ in range(NEWTON_ITERATIONS):
            fx = float(self(x)) - y
            if fx <= 0.0:
                return x
            x_new = x - fx / float(self.derivative(x))
            if x_new <= lo:
                x_new = 0.5 * (lo + x)
            if x_new >= x or x - x_new <= 2 * math.ulp(x):
                return x_new
            x = x_new
        return x

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if y.ndim == 0:
            return np.float64(self._inverse_scalar(float(y)))
        return np.vectorize(self._inverse_scalar, otypes=[float])(y)

    @property
    def lowest_degree(self) -> float:
        return float(min(self.coeffs))

    def to_dict(self) -> dict:
        return {"kind": "poly", "coeffs": {str(k): v for k, v in self.coeffs.items()}}


def gauge_from_dict(d: dict | str) -> Gauge:
    if isinstance(d, str):
        d = json.loads(d)
    kind = d.get("kind")
    if kind == "power":
        return PowerGauge(float(d["p"]))
    if kind in ("poly", "polynomial"):
        return PolynomialGauge(d["coeffs"])
    raise ValueError(f"unknown gauge kind {kind!r}")
