"""Number of satisfactory items in a batch, given the batch total.

An item is satisfactory when its measurement is at least ``c``. With iid
item densities f and the split f = f_ge + f_lt (f_ge = f 1{x >= c}), the
chance that exactly i of n items are satisfactory given the total is

    C(n, i) (f_ge^{*i} * f_lt^{*(n-i)})(T) / f^{*n}(T)

for an exactly observed total, and the same ratio of masses over {T <= t}
or {T >= t} when only a bound is observed. Every chain has (u, v)-invariant
limits, so all of them run on the FFT path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convolve import Backend
from .densities import DEFAULT_EPS, ONE, DensityModel, Indicator, WeightFn
from .errors import ConfigurationError, DegenerateConditioningError, DomainError
from .grid import GridFn1D, interp_linear
from .sum_chain import (
    SumDistribution, Tail, convolution_sample, convolve_cached, prefix_integral,
    prob_tail,
)

# Densities of T below this value are treated as an impossible observation.
DENSITY_FLOOR = 1e-300


@dataclass(frozen=True)
class BatchSpec:
    n: int
    c: float
    model: DensityModel
    step: float = 1e-3
    backend: Backend = Backend.FFT
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"batch size must be at least 1, got {self.n}")
        object.__setattr__(self, "backend", Backend.parse(self.backend))


def log_binom(n: int, i: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1)


def binom(n: int, i: int) -> float:
    if n > 50:
        return math.exp(log_binom(n, i))
    return float(math.comb(n, i))


@dataclass(eq=False)
class _Powers:
    """Convolution powers of the two split densities, built once per spec."""

    spec: BatchSpec
    ge: list = field(default_factory=list)
    lt: list = field(default_factory=list)
    cache: dict = field(default_factory=dict)
    memo: dict = field(default_factory=dict)

    def _sample(self, weight: WeightFn) -> GridFn1D:
        s = self.spec
        return convolution_sample(s.model, weight, s.step, s.eps)

    def build(self) -> "_Powers":
        s = self.spec
        for bucket, weight in ((self.ge, Indicator(s.c, ge=True)), (self.lt, Indicator(s.c, ge=False))):
            base = self._sample(weight)
            bucket.append(base)
            for k in range(2, s.n + 1):
                bucket.append(convolve_cached(bucket[-1], base, s.backend, self.cache, k - 1))
        return self

    def h1(self, i: int) -> GridFn1D:
        """Density of the total when items 1..i are satisfactory and the rest are not."""
        if ("h1", i) not in self.memo:
            self.memo[("h1", i)] = self._h1(i)
        return self.memo[("h1", i)]

    def _h1(self, i: int) -> GridFn1D:
        n = self.spec.n
        if i == 0:
            return self.lt[n - 1]
        if i == n:
            return self.ge[n - 1]
        return convolve_cached(self.ge[i - 1], self.lt[n - i - 1], self.spec.backend, self.cache, n - 1)

    def h2(self) -> GridFn1D:
        # f^{*n} from the same samples, so that numerators add up to it exactly.
        if "h2" not in self.memo:
            self.memo["h2"] = self._h2()
        return self.memo["h2"]

    def _h2(self) -> GridFn1D:
        n = self.spec.n
        total = self._sample(ONE)
        g = total
        for k in range(1, n):
            g = convolve_cached(g, total, self.spec.backend, self.cache, k)
        return g


_POWERS: dict = {}


def _powers(spec: BatchSpec) -> _Powers:
    if spec not in _POWERS:
        if len(_POWERS) > 4:
            _POWERS.clear()
        _POWERS[spec] = _Powers(spec).build()
    return _POWERS[spec]


def _check_i(spec: BatchSpec, i: int) -> None:
    if not 0 <= i <= spec.n:
        raise DomainError(f"i must lie in [0, {spec.n}], got {i}")


def _density_at(g: GridFn1D, t: float) -> float:
    if t < g.grid.origin or t > g.grid.end:
        return 0.0
    return interp_linear(g, t)


def _denominator_density(b: BatchSpec, total: float) -> float:
    den = _density_at(_powers(b).h2(), total) if b.n > 1 else _density_at(_single(b), total)
    if den <= DENSITY_FLOOR:
        raise DegenerateConditioningError(
            f"density of the total at T={total} is {den:.3e}, below {DENSITY_FLOOR:g}")
    return den


def _single(b: BatchSpec) -> GridFn1D:
    return convolution_sample(b.model, ONE, b.step, b.eps)


def count_distribution_exact_total(b: BatchSpec, total: float) -> np.ndarray:
    """P(exactly i satisfactory | T = total) for i = 0..n."""
    p = _powers(b)
    den = _denominator_density(b, total)
    return np.array([binom(b.n, i) * _density_at(p.h1(i), total) / den for i in range(b.n + 1)])


def count_prob_exact_total(b: BatchSpec, i: int, total: float) -> float:
    _check_i(b, i)
    den = _denominator_density(b, total)
    return binom(b.n, i) * _density_at(_powers(b).h1(i), total) / den


def _tail_mass(g: GridFn1D, t: float, direction: Tail) -> float:
    d = SumDistribution(g, prefix_integral(g), 0)
    return prob_tail(d, t, direction)


def count_prob_bounded_total(b: BatchSpec, i: int, t: float,
                             direction: Tail | str = Tail.GE) -> float:
    """P(exactly i satisfactory | T <= t) or (| T >= t)."""
    _check_i(b, i)
    direction = Tail.parse(direction)
    p = _powers(b)
    h2 = p.h2() if b.n > 1 else _single(b)
    den = _tail_mass(h2, t, direction)
    if den <= 0:
        raise DegenerateConditioningError(f"P(T {direction.value} {t}) = {den}")
    return binom(b.n, i) * _tail_mass(p.h1(i), t, direction) / den


def count_distribution_bounded_total(b: BatchSpec, t: float,
                                     direction: Tail | str = Tail.GE) -> np.ndarray:
    return np.array([count_prob_bounded_total(b, i, t, direction) for i in range(b.n + 1)])
