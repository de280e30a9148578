"""Flux models: smooth coupled fluxes, grid interpolants, effective fluxes.

The simulated equation transports w with velocity d f/dw (w, v), where v is a
passive field carried by the linear first family.  Everything downstream works
on the piecewise affine interpolation of f(., v) over the grid eps*Z, so this
module owns:

- ``FluxSpec``: a smooth flux with its analytic partial derivatives and the
  rectangular (w, v) box it is trusted on;
- ``PiecewiseAffineFlux``: node samples of f(., v) on eps*Z;
- ``DerivativeBounds``: sampled sup norms of the second/third derivatives,
  used as the constants of every runtime inequality check;
- ``EffectiveFlux``: the per-block flux whose second w-derivative equals
  d2f/dw2(., v_label) cell by cell, anchored to value 0 / slope 0 at its left
  node (it is only ever used through differences, which are affine-invariant).

All grid coordinates in this package are integer "ticks": node i sits at
``i * eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Box",
    "FluxSpec",
    "DerivativeBounds",
    "PiecewiseAffineFlux",
    "EffectiveFlux",
    "make_flux",
    "interpolate",
    "derivative_bounds",
    "build_effective_flux",
    "FluxTable",
    "validate_flux",
]

Real2 = Callable[[float, float], float]

# nodes and weights for the per-cell quadrature used by EffectiveFlux
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class Box:
    """Rectangular domain of validity in the (w, v) plane."""

    w_min: float
    w_max: float
    v_min: float
    v_max: float

    def contains_w(self, w: float, slack: float = 1e-12) -> bool:
        return self.w_min - slack <= w <= self.w_max + slack

    def contains_v(self, v: float, slack: float = 1e-12) -> bool:
        return self.v_min - slack <= v <= self.v_max + slack


@dataclass(frozen=True)
class FluxSpec:
    """A smooth flux f(w, v) together with its analytic partial derivatives.

    ``eval`` is the flux itself; the derivative evaluators must agree with
    finite differences of ``eval`` (see :func:`validate_flux`).  Hyperbolicity
    requires d_w > -1 throughout the box.
    """

    name: str
    eval: Real2
    d_w: Real2
    d2_ww: Real2
    d2_wv: Real2
    d3_wwv: Real2
    box: Box


@dataclass(frozen=True)
class DerivativeBounds:
    """Sampled sup norms of the derivatives entering the interaction estimates.

    Each bound is the max of the corresponding |derivative| over a dense grid,
    inflated by 1%, so it dominates the true sup norm for smooth fluxes while
    staying within a percent of it.
    """

    norm_d2_ww: float
    norm_d2_wv: float
    norm_d3_wwv: float


@dataclass(frozen=True, eq=False)
class PiecewiseAffineFlux:
    """Samples of f(., v) at the nodes of eps*Z; affine in between.

    ``base_index`` is the tick of the leftmost node, so node k of ``values``
    sits at ``(base_index + k) * eps``.
    """

    eps: float
    base_index: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.values) < 2:
            raise ValueError("piecewise affine flux needs at least 2 nodes")

    @property
    def last_index(self) -> int:
        return self.base_index + len(self.values) - 1

    def value(self, tick: int) -> float:
        if not self.base_index <= tick <= self.last_index:
            raise ValueError(f"node {tick} outside [{self.base_index}, {self.last_index}]")
        return float(self.values[tick - self.base_index])

    def node_slice(self, lo: int, hi: int) -> np.ndarray:
        """Node values on ticks [lo, hi], inclusive."""
        if not (self.base_index <= lo < hi <= self.last_index):
            raise ValueError(f"range [{lo}, {hi}] not within flux grid")
        return self.values[lo - self.base_index : hi - self.base_index + 1]


# ---------------------------------------------------------------------------
# registry of built-in fluxes


def _quadratic_coupled(c: float, box: Box) -> FluxSpec:
    return FluxSpec(
        name="quadratic_coupled",
        eval=lambda w, v: 0.5 * w * w + c * v * w * w,
        d_w=lambda w, v: w + 2.0 * c * v * w,
        d2_ww=lambda w, v: 1.0 + 2.0 * c * v,
        d2_wv=lambda w, v: 2.0 * c * w,
        d3_wwv=lambda w, v: 2.0 * c,
        box=box,
    )


def _quartic(c: float, box: Box) -> FluxSpec:
    return FluxSpec(
        name="quartic",
        eval=lambda w, v: 0.25 * w**4 - 0.5 * w * w + c * v * w * w,
        d_w=lambda w, v: w**3 - w + 2.0 * c * v * w,
        d2_ww=lambda w, v: 3.0 * w * w - 1.0 + 2.0 * c * v,
        d2_wv=lambda w, v: 2.0 * c * w,
        d3_wwv=lambda w, v: 2.0 * c,
        box=box,
    )


def _custom_poly(coeffs: list, box: Box) -> FluxSpec:
    """Polynomial flux sum a * w^i * v^j from a list of [i, j, a] triples."""
    terms = [(int(i), int(j), float(a)) for i, j, a in coeffs]

    def df(di: int, dj: int) -> Real2:
        def g(w: float, v: float) -> float:
            total = 0.0
            for i, j, a in terms:
                if i < di or j < dj:
                    continue
                coef = a
                for k in range(di):
                    coef *= i - k
                for k in range(dj):
                    coef *= j - k
                total += coef * w ** (i - di) * v ** (j - dj)
            return total

        return g

    return FluxSpec(
        name="custom_poly",
        eval=df(0, 0),
        d_w=df(1, 0),
        d2_ww=df(2, 0),
        d2_wv=df(1, 1),
        d3_wwv=df(2, 1),
        box=box,
    )


DEFAULT_BOX = Box(-0.8, 0.8, -0.5, 0.5)


def make_flux(name: str, params: dict | None = None) -> FluxSpec:
    """Build a flux from the registry: quadratic_coupled, quartic, custom_poly."""
    params = dict(params or {})
    box_raw = params.pop("box", None)
    box = Box(*box_raw) if box_raw is not None else DEFAULT_BOX
    if name == "quadratic_coupled":
        return _quadratic_coupled(float(params.pop("c", 0.1)), box)
    if name == "quartic":
        return _quartic(float(params.pop("c", 0.1)), box)
    if name == "custom_poly":
        return _custom_poly(params.pop("coeffs"), box)
    raise ValueError(f"unknown flux {name!r}")


# ---------------------------------------------------------------------------
# operations


def interpolate(spec: FluxSpec, v: float, eps: float, lo: int, hi: int) -> PiecewiseAffineFlux:
    """Sample f(., v) at ticks [lo, hi]; the interpolation is affine in between.

    Node values equal spec.eval exactly at the nodes.  Raises if the range or
    v falls outside the flux box.
    """
    if lo >= hi:
        raise ValueError("need lo < hi")
    if not spec.box.contains_v(v):
        raise ValueError(f"v={v} outside box")
    if not (spec.box.contains_w(lo * eps) and spec.box.contains_w(hi * eps)):
        raise ValueError(f"range [{lo * eps}, {hi * eps}] outside box")
    values = np.array([spec.eval(i * eps, v) for i in range(lo, hi + 1)], dtype=float)
    return PiecewiseAffineFlux(eps=eps, base_index=lo, values=values)


def derivative_bounds(spec: FluxSpec, grid_n: int = 256) -> DerivativeBounds:
    """Sup norms of |d2_ww|, |d2_wv|, |d3_wwv| sampled on a (grid_n+1)^2 grid.

    The 1.01 inflation keeps every downstream inequality conservative with
    respect to the true (unsampled) sup norm.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    ws = np.linspace(spec.box.w_min, spec.box.w_max, grid_n + 1)
    vs = np.linspace(spec.box.v_min, spec.box.v_max, grid_n + 1)
    m_ww = m_wv = m_wwv = 0.0
    for v in vs:
        for w in ws:
            m_ww = max(m_ww, abs(spec.d2_ww(w, v)))
            m_wv = max(m_wv, abs(spec.d2_wv(w, v)))
            m_wwv = max(m_wwv, abs(spec.d3_wwv(w, v)))
    return DerivativeBounds(float(1.01 * m_ww), float(1.01 * m_wv), float(1.01 * m_wwv))


def validate_flux(spec: FluxSpec, eps: float, grid_n: int = 64) -> list[str]:
    """Check hyperbolicity (d_w > -1) on the grid; return violations."""
    problems = []
    ws = np.linspace(spec.box.w_min, spec.box.w_max, grid_n + 1)
    vs = np.linspace(spec.box.v_min, spec.box.v_max, grid_n + 1)
    for v in vs:
        for w in ws:
            if spec.d_w(w, v) <= -1.0:
                problems.append(f"d_w({w}, {v}) = {spec.d_w(w, v)} <= -1")
    return problems


@dataclass(frozen=True, eq=False)
class EffectiveFlux:
    """Flux with d2/dw2 = d2f/dw2(., v_label) on each wave cell of a block.

    Built by integrating the per-cell second derivative twice with 16-point
    Gauss-Legendre quadrature, anchored to value 0 and slope 0 at the left
    node.  Only differences of values/slopes are meaningful (the function is
    defined up to affine terms).
    """

    eps: float
    base_index: int
    values: np.ndarray   # node values, len n
    deriv: np.ndarray    # first derivative at nodes, len n
    v_labels: tuple      # per-cell v tick, len n-1

    @property
    def last_index(self) -> int:
        return self.base_index + len(self.values) - 1

    def as_flux(self) -> PiecewiseAffineFlux:
        return PiecewiseAffineFlux(eps=self.eps, base_index=self.base_index, values=self.values)

    def rh_speed(self, lo: int, hi: int) -> float:
        """Chord slope of the node values over ticks [lo, hi]."""
        if not (self.base_index <= lo < hi <= self.last_index):
            raise ValueError("interval outside effective flux range")
        i0, i1 = lo - self.base_index, hi - self.base_index
        return (float(self.values[i1]) - float(self.values[i0])) / ((hi - lo) * self.eps)


def build_effective_flux(cells: list[tuple[int, int]], spec: FluxSpec, eps: float) -> EffectiveFlux:
    """Construct the effective flux from ``cells = [(cell_tick, v_tick), ...]``.

    ``cell_tick`` is the left node of the cell; cells must be contiguous and
    ascending.  The v label of each cell selects which d2f/dw2(., v) profile
    is integrated across it.
    """
    if not cells:
        raise ValueError("empty cell list")
    ticks = [c for c, _ in cells]
    if any(b != a + 1 for a, b in zip(ticks, ticks[1:])):
        raise ValueError("cells must be contiguous and ascending")
    lo = ticks[0]
    n = len(cells) + 1
    values = np.zeros(n)
    deriv = np.zeros(n)
    for k, (tick, v_tick) in enumerate(cells):
        a = tick * eps
        v = v_tick * eps
        # map Gauss nodes to [a, a+eps]
        x = a + 0.5 * eps * (_GL_NODES + 1.0)
        wts = 0.5 * eps * _GL_WEIGHTS
        g = np.array([spec.d2_ww(xi, v) for xi in x])
        incr_d = float(np.dot(wts, g))
        # value(b) = value(a) + deriv(a)*eps + int_a^b (b - x) g(x) dx
        incr_v = float(np.dot(wts, (a + eps - x) * g))
        deriv[k + 1] = deriv[k] + incr_d
        values[k + 1] = values[k] + deriv[k] * eps + incr_v
    return EffectiveFlux(
        eps=eps,
        base_index=lo,
        values=values,
        deriv=deriv,
        v_labels=tuple(v for _, v in cells),
    )


class FluxTable:
    """Caches the grid interpolants f_eps(., v) of one flux over its box."""

    def __init__(self, spec: FluxSpec, eps: float):
        self.spec = spec
        self.eps = eps
        self.lo = math.ceil(spec.box.w_min / eps - 1e-9)
        self.hi = math.floor(spec.box.w_max / eps + 1e-9)
        if self.hi - self.lo < 1:
            raise ValueError("box too small for the grid step")
        self._cache: dict[int, PiecewiseAffineFlux] = {}

    def flux_for_v(self, v_tick: int) -> PiecewiseAffineFlux:
        got = self._cache.get(v_tick)
        if got is None:
            got = interpolate(self.spec, v_tick * self.eps, self.eps, self.lo, self.hi)
            self._cache[v_tick] = got
        return got
