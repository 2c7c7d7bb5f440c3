"""Distribution and conditional moments of T = X_1 + ... + X_n.

The density of T is built as a convolution chain ``g_1 = h_1 * h_2``,
``g_k = g_{k-1} * h_{k+1}``. Weighted chains put ``w(x) f_1(x)`` (and
optionally ``w_2(x) f_2(x)``) in the leading factors; their prefix integrals
divided by the matching tail probability give conditional expectations.

In chains of two or more factors, continuous factors are sampled on their
truncation window widened by one grid step on each side, so that support
edges with a jump (the exponential at 0) become interior nodes and pick up the half-value rule from
:func:`parsum.densities.sample_to_grid`. With that, the plain Riemann sum in
:mod:`parsum.convolve` is the trapezoid rule over each convolution integral.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .convolve import Backend, convolve_direct, convolve_fft, fft_forward, next_pow2
from .densities import DEFAULT_EPS, ONE, DensityModel, Monomial, WeightFn, as_models, sample_to_grid, truncation_window
from .errors import ConfigurationError, DegenerateConditioningError, NumericalFailure
from .grid import NODE_TOL, Grid1D, GridFn1D, cumtrapz, interp_linear


class Tail(str, enum.Enum):
    LE = "le"
    GE = "ge"

    @classmethod
    def parse(cls, value) -> "Tail":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"<=": "le", "≤": "le", "<": "le", ">=": "ge", "≥": "ge", ">": "ge"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigurationError(f"unknown tail direction {value!r}") from None


@dataclass(frozen=True)
class Factor:
    model: DensityModel
    weight: WeightFn = ONE


@dataclass(frozen=True)
class ChainSpec:
    """An ordered chain of (model, weight) factors and how to discretise it.

    ``window`` overrides the eps-rule truncation window of every factor;
    ``sum_window`` truncates every partial sum to that range after each
    convolution (the partial sums of nonnegative variables never re-enter a
    range once they leave it from above, so for such chains this is exact on
    the retained range).
    """

    factors: tuple[Factor, ...]
    step: float = 1e-3
    backend: Backend = Backend.FFT
    eps: float = DEFAULT_EPS
    window: tuple[float, float] | None = None
    sum_window: tuple[float, float] | None = None

    def __post_init__(self):
        facs = tuple(f if isinstance(f, Factor) else Factor(f) for f in self.factors)
        object.__setattr__(self, "factors", facs)
        object.__setattr__(self, "backend", Backend.parse(self.backend))
        if not facs:
            raise ConfigurationError("a chain needs at least one factor")
        if not self.step > 0:
            raise ConfigurationError(f"step must be positive, got {self.step}")

    @classmethod
    def of(cls, models, n: int | None = None, weights: Sequence[WeightFn] = (), **kw) -> "ChainSpec":
        ms = as_models(models, n)
        ws = list(weights) + [ONE] * (len(ms) - len(weights))
        return cls(tuple(Factor(m, w) for m, w in zip(ms, ws)), **kw)

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def lattice(self) -> bool:
        return all(f.model.is_lattice for f in self.factors)

    @property
    def weighted(self) -> bool:
        return any(f.weight != ONE for f in self.factors)

    def summary(self) -> str:
        kinds = ",".join(sorted({repr(f.model) for f in self.factors}))
        return f"n={self.n} step={self.step} backend={self.backend.value} models={kinds}"


@dataclass(frozen=True, eq=False)
class SumDistribution:
    density: GridFn1D
    cdf: GridFn1D
    n: int
    lattice: bool = False
    provenance: str = ""

    @property
    def total(self) -> float:
        return float(self.cdf.values[-1])


def factor_window(model: DensityModel, step: float, eps: float = DEFAULT_EPS,
                  window: tuple[float, float] | None = None, pad: bool = True) -> tuple[float, float]:
    lo, hi = window if window is not None else truncation_window(model, eps)
    if model.is_lattice:
        return (lo, hi if hi > lo else lo + step)
    if not pad:
        return (lo, hi)
    return (lo - step, hi + step)


def convolution_sample(model: DensityModel, weight: WeightFn, step: float, eps: float = DEFAULT_EPS,
                       window: tuple[float, float] | None = None) -> GridFn1D:
    """Sample of ``weight * pdf`` ready to enter a convolution (padded window)."""
    return sample_to_grid(model, weight, factor_window(model, step, eps, window), step)


def factor_sample(factor: Factor, spec: ChainSpec) -> GridFn1D:
    # A lone factor is never convolved, so the inward limit at an edge is exact.
    win = factor_window(factor.model, spec.step, spec.eps, spec.window, pad=spec.n > 1)
    return sample_to_grid(factor.model, factor.weight, win, spec.step)


def _trim(g: GridFn1D, window: tuple[float, float] | None) -> GridFn1D:
    if window is None:
        return g
    h = g.grid.step
    lo = math.floor(window[0] / h + NODE_TOL) - 1
    hi = math.ceil(window[1] / h - NODE_TOL) + 1
    off = g.grid.offset
    i0 = max(0, lo - off)
    i1 = min(g.grid.count - 1, hi - off)
    if i1 - i0 < 1:
        raise ConfigurationError(f"sum window {window} misses the support of the chain")
    if i0 == 0 and i1 == g.grid.count - 1:
        return g
    return GridFn1D(Grid1D.from_indices(off + i0, off + i1, h), g.values[i0:i1 + 1])


def convolve_cached(g: GridFn1D, h: GridFn1D, backend: Backend, cache: dict, k: int = 0) -> GridFn1D:
    """One chain step ``g * h``; FFT spectra of ``h`` are kept in ``cache``."""
    try:
        if backend is Backend.DIRECT:
            return convolve_direct(g, h)
        size = next_pow2(g.grid.count + h.grid.count - 1)
        key = (id(h), size)
        if key not in cache:
            cache[key] = (h, fft_forward(h.values, size, h.grid.step))
        return convolve_fft(g, h, cache[key][1])
    except NumericalFailure as exc:
        raise NumericalFailure(f"convolution step k={k}: {exc}") from exc


@lru_cache(maxsize=64)
def build_chain(spec: ChainSpec) -> SumDistribution:
    samples = [factor_sample(f, spec) for f in spec.factors]
    g = _trim(samples[0], spec.sum_window)
    cache: dict = {}
    for k, h in enumerate(samples[1:], start=1):
        g = _trim(convolve_cached(g, h, spec.backend, cache, k), spec.sum_window)
    return SumDistribution(g, prefix_integral(g, spec.lattice), spec.n, spec.lattice, spec.summary())


def prefix_integral(g: GridFn1D, lattice: bool = False) -> GridFn1D:
    if lattice:
        return GridFn1D(g.grid, np.cumsum(g.values * g.grid.step))
    return cumtrapz(g)


def _cdf_at(d: SumDistribution, tau: float) -> float:
    """P(T <= tau) (or the weighted analogue) read off the prefix integral."""
    g = d.cdf.grid
    if tau < g.origin:
        return 0.0
    if tau > g.end:
        return d.total
    if d.lattice:
        r = (tau - g.origin) / g.step
        k = math.floor(r + NODE_TOL * max(1.0, abs(r)))
        return float(d.cdf.values[min(k, g.count - 1)])
    return interp_linear(d.cdf, tau)


def _mass_below(d: SumDistribution, tau: float) -> float:
    """P(T < tau); differs from ``_cdf_at`` only by a lattice atom at tau."""
    if not d.lattice:
        return _cdf_at(d, tau)
    g = d.cdf.grid
    r = (tau - g.origin) / g.step
    k = math.ceil(r - NODE_TOL * max(1.0, abs(r))) - 1
    if k < 0:
        return 0.0
    return float(d.cdf.values[min(k, g.count - 1)])


def prob_tail(d: SumDistribution, tau: float, direction: Tail | str = Tail.GE) -> float:
    """P(T <= tau) or P(T >= tau) from a chain's prefix integral."""
    if Tail.parse(direction) is Tail.LE:
        return _cdf_at(d, tau)
    return d.total - _mass_below(d, tau)


Interval = tuple[float | None, float | None]


def interval_prob(d: SumDistribution, lo: float | None = None, hi: float | None = None) -> float:
    """P(lo <= T <= hi) with ``None`` meaning unbounded."""
    upper = d.total if hi is None else _cdf_at(d, hi)
    lower = 0.0 if lo is None else _mass_below(d, lo)
    return max(upper - lower, 0.0)


def _intersect(a: Interval, b: Interval) -> Interval:
    lo = [x for x in (a[0], b[0]) if x is not None]
    hi = [x for x in (a[1], b[1]) if x is not None]
    return (max(lo) if lo else None, min(hi) if hi else None)


def cond_prob(d: SumDistribution, event: Interval, given: Interval) -> float:
    """P(T in event | T in given) for closed intervals, ``None`` = unbounded."""
    den = interval_prob(d, *given)
    if den <= 0:
        raise DegenerateConditioningError(f"P(T in {given}) = {den}")
    lo, hi = _intersect(event, given)
    if lo is not None and hi is not None and lo > hi:
        return 0.0
    return interval_prob(d, lo, hi) / den


def tail_interval(tau: float, direction: Tail | str) -> Interval:
    return (None, tau) if Tail.parse(direction) is Tail.LE else (tau, None)


# -- conditional expectations -------------------------------------------------

def _spec(models, n=None, **opts) -> ChainSpec:
    return ChainSpec.of(models, n, **opts)


def _reordered(models: list, first: Sequence[int]) -> list:
    rest = [m for i, m in enumerate(models) if i not in first]
    return [models[i] for i in first] + rest


def _weighted_tail(models: list, weights: Sequence[WeightFn], tau, direction, opts) -> float:
    base = _spec(models, **opts)
    p = prob_tail(build_chain(base), tau, direction)
    if p <= 0:
        raise DegenerateConditioningError(f"P(T {Tail.parse(direction).value} {tau}) = {p}")
    weighted = ChainSpec.of(models, weights=weights, **opts)
    return prob_tail(build_chain(weighted), tau, direction) / p


def cond_expect_single(models, w: WeightFn, tau: float, direction: Tail | str = Tail.GE,
                       index: int = 0, n: int | None = None, **opts) -> float:
    """E[w(X_index) | T <= tau or T >= tau].

    The factor at ``index`` is moved to the front of the chain and carries
    the weight. ``opts`` are ChainSpec fields (step, backend, eps, window, ...).
    """
    ms = as_models(models, n)
    if not 0 <= index < len(ms):
        raise ConfigurationError(f"index {index} out of range for {len(ms)} variables")
    return _weighted_tail(_reordered(ms, [index]), [w], tau, direction, opts)


def cond_expect_pair(models, w1: WeightFn, w2: WeightFn, tau: float,
                     direction: Tail | str = Tail.GE, indices: tuple[int, int] = (0, 1),
                     n: int | None = None, **opts) -> float:
    """E[w1(X_i) w2(X_j) | T <= tau or T >= tau] for distinct ``indices`` (i, j)."""
    ms = as_models(models, n)
    i, j = indices
    if i == j or not (0 <= i < len(ms) and 0 <= j < len(ms)):
        raise ConfigurationError(f"need two distinct indices below {len(ms)}, got {indices}")
    return _weighted_tail(_reordered(ms, [i, j]), [w1, w2], tau, direction, opts)


def _iid(ms: list) -> bool:
    return all(m == ms[0] for m in ms)


def cond_expect_total(models, tau: float, direction: Tail | str = Tail.GE,
                      n: int | None = None, fast_path: bool = True, **opts) -> float:
    """E[T | T <= tau or T >= tau] as a sum of per-coordinate conditional means."""
    ms = as_models(models, n)
    x = Monomial(1.0)
    if fast_path and _iid(ms):
        return len(ms) * cond_expect_single(ms, x, tau, direction, **opts)
    return math.fsum(cond_expect_single(ms, x, tau, direction, index=i, **opts)
                     for i in range(len(ms)))


def cond_second_moment_total(models, tau: float, direction: Tail | str = Tail.GE,
                             n: int | None = None, fast_path: bool = True, **opts) -> float:
    """E[T^2 | ...] from the single squares and the pairwise cross products."""
    ms = as_models(models, n)
    k = len(ms)
    x, x2 = Monomial(1.0), Monomial(2.0)
    if fast_path and _iid(ms):
        sq = k * cond_expect_single(ms, x2, tau, direction, **opts)
        cross = k * (k - 1) * cond_expect_pair(ms, x, x, tau, direction, **opts) if k > 1 else 0.0
        return sq + cross
    terms = [cond_expect_single(ms, x2, tau, direction, index=i, **opts) for i in range(k)]
    terms += [2.0 * cond_expect_pair(ms, x, x, tau, direction, indices=(i, j), **opts)
              for i in range(k) for j in range(i + 1, k)]
    return math.fsum(terms)


def distribution(models, n: int | None = None, **opts) -> SumDistribution:
    """Unweighted chain for ``models`` (a list, or one model repeated ``n`` times)."""
    return build_chain(_spec(models, n, **opts))


def with_options(spec: ChainSpec, **changes) -> ChainSpec:
    return replace(spec, **changes)
