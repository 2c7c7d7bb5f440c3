"""Independent reference values: Monte Carlo estimators and dense quadrature.

All estimators draw in fixed-size batches. Batch ``b`` uses a counter-based
Philox generator keyed by the b-th child of ``SeedSequence(seed)``, so a
given (samples, seed, batch) plan reproduces bit for bit and batches could
be farmed out in any order; partial sums are always reduced in batch order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .densities import DEFAULT_EPS, DensityModel, as_models, truncation_window
from .errors import ConfigurationError, OracleDegenerateError
from .grid import NODE_TOL, Grid1D, trapezoid_weights
from .recursion import Predicate, RegionSpec
from .sum_chain import Tail

DEFAULT_SEED = 20240607
MAX_BRUTE_FORCE_N = 4


@dataclass(frozen=True)
class McConfig:
    samples: int = 10_000_000
    seed: int = DEFAULT_SEED
    batch: int = 1_000_000

    def __post_init__(self):
        if self.samples < 1 or self.batch < 1:
            raise ConfigurationError("samples and batch must be positive")

    def batches(self) -> Iterator[tuple[np.random.Generator, int]]:
        count = -(-self.samples // self.batch)
        children = np.random.SeedSequence(self.seed).spawn(count)
        for b, child in enumerate(children):
            size = min(self.batch, self.samples - b * self.batch)
            yield np.random.Generator(np.random.Philox(child)), size


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    accepted: int = 0

    def z(self, reference: float) -> float:
        if self.std_error == 0:
            return 0.0 if reference == self.value else math.copysign(math.inf, reference - self.value)
        return (reference - self.value) / self.std_error

    def __iter__(self):
        yield self.value
        yield self.std_error


def binomial_se(hits: int, samples: int) -> float:
    """Standard error of hits/samples; an all-or-nothing count is moved half a hit
    inwards so that a deterministic event still gets a finite z-score."""
    p = min(max(hits, 0.5), samples - 0.5) / samples
    return math.sqrt(p * (1.0 - p) / samples)


def draw(models: Sequence[DensityModel], rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` x n matrix of independent draws, column i from ``models[i]``."""
    return np.column_stack([np.asarray(m.sample(rng, size), dtype=float) for m in models])


def _in_tail(t: np.ndarray, tau: float, direction: Tail) -> np.ndarray:
    return t <= tau if direction is Tail.LE else t >= tau


def mc_tail(models, tau: float, direction: Tail | str = Tail.GE, cfg: McConfig = McConfig(),
            n: int | None = None) -> Estimate:
    """P(T <= tau) or P(T >= tau) with its binomial standard error."""
    ms = as_models(models, n)
    direction = Tail.parse(direction)
    hits = 0
    for rng, size in cfg.batches():
        hits += int(np.count_nonzero(_in_tail(draw(ms, rng, size).sum(axis=1), tau, direction)))
    return Estimate(hits / cfg.samples, binomial_se(hits, cfg.samples), cfg.samples)


SampleFn = Callable[[np.ndarray], np.ndarray]


def coordinate(i: int, w: Callable = lambda x: x) -> SampleFn:
    return lambda X: w(X[:, i])


def total(power: int = 1) -> SampleFn:
    return lambda X: X.sum(axis=1) ** power


def pair(i: int, j: int) -> SampleFn:
    return lambda X: X[:, i] * X[:, j]


def event(lo: float | None = None, hi: float | None = None, count: int | None = None) -> SampleFn:
    """Indicator of lo <= X_1 + .. + X_count <= hi (all coordinates by default)."""
    def f(X):
        t = X[:, :count].sum(axis=1)
        ok = np.ones(len(t), dtype=bool)
        if lo is not None:
            ok &= t >= lo
        if hi is not None:
            ok &= t <= hi
        return ok.astype(float)
    return f


def mc_conditional_expectation(models, weight: SampleFn, tau: float,
                               direction: Tail | str = Tail.GE, cfg: McConfig = McConfig(),
                               n: int | None = None,
                               given: tuple[float | None, float | None] | None = None) -> Estimate:
    """E[weight(X) | T in the tail] by rejection, with the sample standard error.

    ``given`` replaces the tail by the closed interval [lo, hi] when set.
    """
    ms = as_models(models, n)
    direction = Tail.parse(direction)
    acc, s1, s2 = 0, 0.0, 0.0
    for rng, size in cfg.batches():
        X = draw(ms, rng, size)
        t = X.sum(axis=1)
        if given is None:
            keep = _in_tail(t, tau, direction)
        else:
            keep = event(*given)(X).astype(bool)
        w = np.asarray(weight(X[keep]), dtype=float)
        acc += len(w)
        s1 += math.fsum(w)
        s2 += math.fsum(w * w)
    if acc == 0:
        raise OracleDegenerateError("no sample met the conditioning event")
    mean = s1 / acc
    var = max(s2 / acc - mean * mean, 0.0)
    se = math.sqrt(var / acc) if acc > 1 else math.inf
    return Estimate(mean, se, acc)


def stop_times(X: np.ndarray, c_star: float) -> np.ndarray:
    """First n (1-based) at which the rule fires, or 0 when it never does.

    The rule at n = 3..N compares X_n and X_{n-1} with the mean of X_1..X_{n-2}.
    """
    N = X.shape[1]
    means = np.cumsum(X, axis=1) / np.arange(1, N + 1)
    fired = np.zeros(len(X), dtype=np.int64)
    for n in range(3, N + 1):
        limit = means[:, n - 3] + c_star
        hit = (X[:, n - 1] > limit) & (X[:, n - 2] > limit) & (fired == 0)
        fired[hit] = n
    return fired


def mc_no_stop(problem, c_star: float, cfg: McConfig = McConfig()) -> Estimate:
    """Frequency with which the monitoring rule never fires within the horizon."""
    ms = as_models(problem.model, problem.N)
    ok = 0
    for rng, size in cfg.batches():
        ok += int(np.count_nonzero(stop_times(draw(ms, rng, size), c_star) == 0))
    return Estimate(ok / cfg.samples, binomial_se(ok, cfg.samples), cfg.samples)


def mc_count_exact_total(n: int, c: float, model: DensityModel, total_value: float,
                         cfg: McConfig = McConfig()) -> tuple[np.ndarray, np.ndarray]:
    """P(exactly i of n items >= c | T = total) for i = 0..n.

    X_1..X_{n-1} are drawn freely and X_n = total - (X_1 + .. + X_{n-1}) is
    weighted by its density, which conditions on the total without a band.
    Returns the ratio estimates and their delta-method standard errors.
    """
    if n < 2:
        raise ConfigurationError("the weighted estimator needs n >= 2")
    ms = as_models(model, n - 1)
    sw = 0.0
    swi = np.zeros(n + 1)
    sww = 0.0
    swwi = np.zeros(n + 1)
    for rng, size in cfg.batches():
        X = draw(ms, rng, size)
        last = total_value - X.sum(axis=1)
        w = np.asarray(model.pdf(last), dtype=float)
        k = np.count_nonzero(X >= c, axis=1) + (last >= c)
        sw += math.fsum(w)
        sww += math.fsum(w * w)
        swi += np.bincount(k, weights=w, minlength=n + 1)
        swwi += np.bincount(k, weights=w * w, minlength=n + 1)
    if sw <= 0:
        raise OracleDegenerateError(f"the total {total_value} was never reachable")
    r = swi / sw
    # sum_j w_j^2 (1{k_j = i} - r)^2 expanded over the accumulated moments
    resid = swwi * (1.0 - 2.0 * r) + r * r * sww
    return r, np.sqrt(np.maximum(resid, 0.0)) / sw


def mc_count_prob_bounded_total(n: int, c: float, model: DensityModel, i: int, t: float,
                                direction: Tail | str = Tail.GE,
                                cfg: McConfig = McConfig()) -> Estimate:
    ms = as_models(model, n)
    return mc_conditional_expectation(
        ms, lambda X: (np.count_nonzero(X >= c, axis=1) == i).astype(float), t, direction, cfg)


# -- dense quadrature ---------------------------------------------------------

def _interval_mask(region: RegionSpec, k: int, y, u, v, h: float) -> np.ndarray:
    tol = NODE_TOL * max(1.0, h)
    ok = np.zeros(np.broadcast(y, u, v).shape, dtype=bool)
    for a, b in region.intervals(k, u, v):
        ok |= (y >= a - tol * h) & (y <= b + tol * h)
    return ok


def brute_force_eq6(models, region: RegionSpec, final_mask: Predicate | None = None, *,
                    step: float = 5e-3, eps: float = DEFAULT_EPS,
                    window: tuple[float, float] | None = None,
                    span: tuple[float, float] | None = None) -> float:
    """Dense quadrature of h_1(y_1) h_2(y_2 - y_1) ... h_n(y_n - y_{n-1}) over the region.

    Every y_k lives on one lattice covering ``span`` (default: the sum of the
    factor windows). Variables are eliminated one at a time from the front;
    at each elimination the region, the factor supports and the partial-sum
    range form the mask whose runs get trapezoid weights. The cost is cubic
    in the lattice size per variable, hence the cap on n.
    """
    ms = as_models(models, region.n)
    n = len(ms)
    if n > MAX_BRUTE_FORCE_N:
        raise ConfigurationError(f"brute force is limited to n <= {MAX_BRUTE_FORCE_N}, got {n}")
    if n < 3:
        raise ConfigurationError("brute force needs n >= 3")
    wins = [window or truncation_window(m, eps) for m in ms]
    lo = math.fsum(w[0] for w in wins) if span is None else span[0]
    hi = math.fsum(w[1] for w in wins) if span is None else span[1]
    lo = min(lo, min(w[0] for w in wins))
    grid = Grid1D.from_window(lo, hi, step)
    y = grid.abscissae()
    h = grid.step
    tol = NODE_TOL * h

    def factor(i, d):
        # density of x_{i+1} = d, restricted to its window
        w = wins[i]
        inside = (d >= w[0] - tol) & (d <= w[1] + tol)
        return np.where(inside, ms[i].pdf(np.clip(d, w[0], w[1])), 0.0), inside

    def partial_range(k):
        return (math.fsum(w[0] for w in wins[:k]) - tol, math.fsum(w[1] for w in wins[:k]) + tol)

    # phi[a, b] = integral over y_1..y_{k-1} with y_k = y[a], y_{k+1} = y[b]
    f1, in1 = factor(0, y)
    f2, in2 = factor(1, y[None, :] - y[:, None])
    phi = f1[:, None] * f2
    support = in1[:, None] & in2
    for k in range(1, n - 1):
        lo_k, hi_k = partial_range(k)
        in_range = (y >= lo_k) & (y <= hi_k)
        nxt = np.zeros_like(phi)
        fk, ink = factor(k + 1, y[None, :] - y[:, None])       # over (y_{k+1}, y_{k+2})
        for c in range(len(y)):
            v = y[c]
            mask = (support & in_range[:, None]
                    & _interval_mask(region, k, y[:, None], y[None, :], v, h))
            wts = trapezoid_weights(mask, h, axis=0)
            nxt[:, c] = np.einsum("ab,ab->b", wts, phi) * fk[:, c]
        phi = nxt
        support = ink
    lo_k, hi_k = partial_range(n - 1)
    mask = support & ((y >= lo_k) & (y <= hi_k))[:, None]
    if final_mask is None:
        final_mask = region.final_mask()
    if final_mask is not None:
        mask &= np.asarray(final_mask(y[:, None], y[None, :]), dtype=bool)
    if not mask.any():
        return 0.0
    rows = np.sum(trapezoid_weights(mask, h, axis=1) * phi, axis=1)
    return float(np.dot(trapezoid_weights(mask.any(axis=1), h), rows))
