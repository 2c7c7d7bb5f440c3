"""Recursive integration over regions defined on consecutive partial sums.

With y_k = x_1 + ... + x_k, the probability of the event

    (y_k, y_{k+1}, y_{k+2}) in J_k   for k = 1..n-2,   (y_{n-1}, y_n) in F

is reduced to a sequence of two-dimensional computations::

    g_1(u, v) = int_{J_1(., u, v)} h_1(x) h_2(u - x) dx
    g_k(u, v) = int_{J_k(., u, v)} g_{k-1}(x, u) h_{k+1}(u - x) dx
    P         = iint_F g_{n-2}(u, v) h_n(v - u) du dv

For every u the row integrand is integrated once into a prefix integral,
and each interval [a, b] of J_k(., u, v) then costs two interpolations.

Storage is sheared: level k keeps g_k on nodes (u, d) with d = v - u, i.e.
d is the value of the next variable x_{k+2}. The d-axis is then the sample
grid of h_{k+2}, and the lookup g_{k-1}(x, u) in the next level reads
column d = u - x directly, with no interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .densities import DEFAULT_EPS, ONE, DensityModel, as_models, sample_to_grid, truncation_window
from .errors import ConfigurationError, NumericalFailure, UnsupportedRegionError
from .grid import Grid1D, Grid2D, GridFn1D, GridFn2D, integrate_2d_masked, interp_rows

IntervalFn = Callable[[int, np.ndarray, np.ndarray], Sequence[tuple[np.ndarray, np.ndarray]]]
Predicate = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Results above 1 by more than this (plus the grid allowance below) are a
# numerical failure. The trapezoid rule overstates the mass of a convex
# density by about step^2/12 per level, so n levels get n * step^2 of slack.
OVERSHOOT_TOL = 1e-6
CLAMP_TOP = 1.0 + 1e-9
# Cells per vectorised block of a level (bounds peak memory).
BLOCK_CELLS = 1 << 22
# Largest (u, d) lattice a level may allocate.
MAX_LEVEL_CELLS = 120_000_000


@dataclass(frozen=True)
class RegionSpec:
    """Cross-sections J_k(., u, v) as unions of closed intervals in y_k.

    ``intervals(k, u, v)`` receives broadcastable arrays and returns a list of
    ``(a, b)`` array pairs; a pair with ``a > b`` is empty. ``domain12(k)``
    and ``domain23(k)`` return predicates on (u, v); the former drives the
    zero-fill of g_{k-1}, the latter supplies the default final region.
    """

    n: int
    intervals: IntervalFn
    domain12: Callable[[int], Predicate] | None = None
    domain23: Callable[[int], Predicate] | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ConfigurationError(f"the recursion needs n >= 3, got {self.n}")

    def final_mask(self) -> Predicate | None:
        return None if self.domain23 is None else self.domain23(self.n - 2)


def _full(k, u, v):
    shape = np.broadcast(u, v).shape
    return [(np.full(shape, -np.inf), np.full(shape, np.inf))]


def unconstrained(n: int) -> RegionSpec:
    return RegionSpec(n, _full)


# -- regions from linear constraints ----------------------------------------

@dataclass(frozen=True)
class Linear:
    """``s * (x_1+..+x_k) + p * x_{k+1} + q * x_{k+2} <= bound`` (``>=`` if ``ge``)."""

    s: float
    p: float = 0.0
    q: float = 0.0
    bound: float = 0.0
    ge: bool = False

    def interval(self, u, v):
        # Substitute x_1+..+x_k = y, x_{k+1} = u - y, x_{k+2} = v - u.
        coef = self.s - self.p
        rhs = self.bound - self.p * u - self.q * (v - u)
        shape = np.broadcast(u, v).shape
        lo = np.full(shape, -np.inf)
        hi = np.full(shape, np.inf)
        if coef == 0:
            ok = (rhs >= 0) if not self.ge else (rhs <= 0)
            lo = np.where(ok, lo, np.inf)
            hi = np.where(ok, hi, -np.inf)
            return lo, hi
        bound = np.broadcast_to(rhs / coef, shape)
        upper = (coef > 0) != self.ge
        return (lo, bound) if upper else (bound, hi)


Conjunction = Sequence[Linear]


def _conjunction(terms: Conjunction, u, v):
    shape = np.broadcast(u, v).shape
    lo = np.full(shape, -np.inf)
    hi = np.full(shape, np.inf)
    for t in terms:
        if not isinstance(t, Linear):
            raise UnsupportedRegionError(
                f"constraint {t!r} is not linear in the partial sum; its cross-section "
                "need not be an interval")
        a, b = t.interval(u, v)
        lo = np.maximum(lo, a)
        hi = np.minimum(hi, b)
    return lo, hi


def disjoint_union(pieces: Sequence[tuple[np.ndarray, np.ndarray]]) -> list[tuple[np.ndarray, np.ndarray]]:
    """Rewrite possibly overlapping intervals as disjoint ones, sorted by start."""
    if len(pieces) <= 1:
        return list(pieces)
    a = np.stack(np.broadcast_arrays(*[p[0] for p in pieces]))
    b = np.stack(np.broadcast_arrays(*[p[1] for p in pieces]))
    empty = a > b
    a = np.where(empty, np.inf, a)
    b = np.where(empty, -np.inf, b)
    order = np.argsort(a, axis=0, kind="stable")
    a = np.take_along_axis(a, order, axis=0)
    b = np.take_along_axis(b, order, axis=0)
    out = []
    reach = np.full(a.shape[1:], -np.inf)
    for i in range(a.shape[0]):
        start = np.maximum(a[i], reach)
        out.append((start, b[i]))
        reach = np.maximum(reach, b[i])
    return out


def transform_region(n: int, constraints: Callable[[int], Sequence[Conjunction]],
                     final: Predicate | None = None) -> RegionSpec:
    """Region from constraints written in the original variables.

    ``constraints(k)`` is a disjunction of conjunctions of :class:`Linear`
    terms on (x_1+..+x_k, x_{k+1}, x_{k+2}); an empty list leaves step k
    unconstrained.
    """
    def intervals(k, u, v):
        dnf = list(constraints(k))
        if not dnf:
            return _full(k, u, v)
        return disjoint_union([_conjunction(c, u, v) for c in dnf])

    domain23 = None if final is None else (lambda k: final)
    return RegionSpec(n, intervals, domain23=domain23)


def band_region(n: int, lower: Sequence[float] | None = None, upper: Sequence[float] | None = None,
                final: Predicate | None = None) -> RegionSpec:
    """Bands ``lower[k-1] <= y_k <= upper[k-1]`` on the partial sums, k = 1..n-2."""
    def constraints(k):
        terms = []
        if lower is not None and lower[k - 1] is not None:
            terms.append(Linear(1.0, bound=lower[k - 1], ge=True))
        if upper is not None and upper[k - 1] is not None:
            terms.append(Linear(1.0, bound=upper[k - 1]))
        return [terms] if terms else []

    return transform_region(n, constraints, final)


# -- the recursion -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RecursionChain:
    """Sampled factors h_1..h_n and the u-axis of every level."""

    models: tuple[DensityModel, ...]
    step: float
    eps: float = DEFAULT_EPS
    window: tuple[float, float] | None = None
    u_window: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(as_models(self.models)))
        if not self.step > 0:
            raise ConfigurationError(f"step must be positive, got {self.step}")
        if any(m.is_lattice for m in self.models):
            raise ConfigurationError("the recursion integrates continuous densities only")
        wins = [self.window or truncation_window(m, self.eps) for m in self.models]
        object.__setattr__(self, "_windows", tuple(wins))
        samples = tuple(sample_to_grid(m, ONE, w, self.step) for m, w in zip(self.models, wins))
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return len(self.models)

    def u_axis(self, k: int) -> Grid1D:
        """Grid for u = y_{k+1} at level k."""
        lo = math.fsum(w[0] for w in self._windows[: k + 1])
        hi = math.fsum(w[1] for w in self._windows[: k + 1])
        if self.u_window is not None:
            lo, hi = max(lo, self.u_window[0]), min(hi, self.u_window[1])
        return Grid1D.from_window(lo, hi, self.step)

    def d_axis(self, k: int) -> GridFn1D:
        """Sample of h_{k+2}, whose grid is the d-axis of level k."""
        return self.samples[k + 1]


def lattice_coords(u_axis: Grid1D, d_axis: Grid1D, rows: np.ndarray | None = None):
    """Abscissae u and v = u + d of lattice nodes, each from one integer times the step.

    Forming v as a float sum u + d can push a node that lies exactly on a
    region boundary (v = 3, say) across it.
    """
    h = u_axis.step
    iu = u_axis.offset + (np.arange(u_axis.count) if rows is None else rows)
    iv = iu[:, None] + d_axis.offset + np.arange(d_axis.count)[None, :]
    return (iu * h)[:, None], iv * h


@dataclass(frozen=True, eq=False)
class RecursionState:
    k: int
    g: GridFn2D

    @property
    def u_axis(self) -> Grid1D:
        return self.g.grid.u_axis

    @property
    def d_axis(self) -> Grid1D:
        return self.g.grid.v_axis


def _level(k: int, prev: np.ndarray, x_axis: Grid1D, chain: RecursionChain,
           region: RegionSpec) -> GridFn2D:
    """Shared body of the first and later levels.

    ``prev`` is h_1 on ``x_axis`` (k = 1) or g_{k-1} on (x, e) with e on the
    grid of h_{k+1} (k >= 2).
    """
    h = chain.step
    hE = chain.samples[k]
    e_axis = hE.grid
    u_axis = chain.u_axis(k)
    d_axis = chain.d_axis(k).grid
    shift = u_axis.offset - e_axis.offset - x_axis.offset
    ne, nd = e_axis.count, d_axis.count
    if u_axis.count * nd > MAX_LEVEL_CELLS:
        raise ConfigurationError(
            f"level {k} lattice of {u_axis.count} x {nd} nodes is too large; "
            "use a coarser step, a narrower window or a u_window cap")
    j = np.arange(ne)
    d = d_axis.abscissae()
    out = np.zeros((u_axis.count, nd))
    rows_per_block = max(1, BLOCK_CELLS // max(ne, nd))
    for i0 in range(0, u_axis.count, rows_per_block):
        i = np.arange(i0, min(i0 + rows_per_block, u_axis.count))
        xi = i[:, None] + shift - j[None, :]
        valid = (xi >= 0) & (xi < x_axis.count)
        xc = np.clip(xi, 0, x_axis.count - 1)
        vals = prev[xc] if prev.ndim == 1 else prev[xc, j[None, :]]
        row = np.where(valid, vals, 0.0) * hE.values[None, :]
        inc = 0.5 * h * (row[:, :-1] + row[:, 1:]) * (valid[:, :-1] & valid[:, 1:])
        prefix = np.zeros_like(row)
        np.cumsum(inc, axis=1, out=prefix[:, 1:])
        u, v = lattice_coords(u_axis, d_axis, i)
        acc = np.zeros((len(i), nd))
        for a, b in region.intervals(k, u, v):
            # x in [a, b]  <=>  e = u - x in [u - b, u - a]
            hi = np.broadcast_to((u - a - e_axis.origin) / h, acc.shape)
            lo = np.broadcast_to((u - b - e_axis.origin) / h, acc.shape)
            span = interp_rows(prefix, hi) - interp_rows(prefix, lo)
            acc += np.where(hi > lo, span, 0.0)
        if region.domain12 is not None:
            acc *= np.asarray(region.domain12(k + 1)(u, v), dtype=bool)
        out[i] = acc
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise NumericalFailure(
            f"level {k}: non-finite value at (u, v) = "
            f"({u_axis.origin + bad[0] * h}, {u_axis.origin + bad[0] * h + d[bad[1]]})")
    return GridFn2D(Grid2D(u_axis, d_axis), out)


def init_g1(chain: RecursionChain, region: RegionSpec) -> RecursionState:
    h1 = chain.samples[0]
    return RecursionState(1, _level(1, h1.values, h1.grid, chain, region))


def step(state: RecursionState, chain: RecursionChain, region: RegionSpec) -> RecursionState:
    k = state.k + 1
    return RecursionState(k, _level(k, state.g.values, state.u_axis, chain, region))


def finalize(state: RecursionState, chain: RecursionChain,
             final_mask: Predicate | None = None) -> float:
    """Integrate g_{n-2}(u, v) h_n(v - u) over the final region."""
    hn = chain.samples[-1]
    integrand = GridFn2D(state.g.grid, state.g.values * hn.values[None, :])
    if final_mask is None:
        mask = None
    else:
        u, v = lattice_coords(state.u_axis, state.d_axis)
        mask = np.broadcast_to(np.asarray(final_mask(u, v), dtype=bool), integrand.values.shape)
    p = integrate_2d_masked(integrand, mask)
    if p > 1.0 + OVERSHOOT_TOL + chain.n * chain.step ** 2:
        raise NumericalFailure(f"probability {p!r} exceeds 1")
    return min(max(p, 0.0), CLAMP_TOP)


def evaluate(models, region: RegionSpec, final_mask: Predicate | None = None, *,
             step_size: float = 1e-2, eps: float = DEFAULT_EPS,
             window: tuple[float, float] | None = None,
             u_window: tuple[float, float] | None = None) -> float:
    """Probability of the region; ``models`` is one model (repeated n times) or n models.

    ``final_mask`` defaults to the region's ``domain23(n-2)``; with neither,
    the last pair is unconstrained.
    """
    chain = RecursionChain(tuple(as_models(models, region.n)), step_size, eps, window, u_window)
    if chain.n != region.n:
        raise ConfigurationError(f"{chain.n} factors for a region over {region.n} variables")
    mask = final_mask if final_mask is not None else region.final_mask()
    state = init_g1(chain, region)
    for _ in range(region.n - 3):
        state = step(state, chain, region)
    return finalize(state, chain, mask)
