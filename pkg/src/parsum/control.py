"""Two-consecutive-exceedance monitoring rule and its control limit.

Measurements X_1..X_N are iid and nonnegative while the process is in
control. For n = 3..N the process is stopped when both X_n and X_{n-1}
exceed the running mean of X_1..X_{n-2} plus c. The control limit c(alpha, N)
makes the probability of never stopping equal to 1 - alpha.

With u = y_{k+1} and v = y_{k+2}, the step-k condition of staying in control
reads y_k >= min{k/(k+1) (u - c), k (v - u - c)}, and y_k <= u holds for
nonnegative variables, so every cross-section is a single interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .convolve import Backend
from .densities import DEFAULT_EPS, DensityModel, Exponential, truncation_window
from .errors import ConfigurationError, RootNotBracketed
from .recursion import Linear, RegionSpec, evaluate, transform_region

DEFAULT_STEP = 0.02
U_CAP_LIMIT = 60.0
BISECTION_TOL = 0.005


@dataclass(frozen=True)
class ControlProblem:
    N: int
    alpha: float = 0.10
    model: DensityModel = Exponential(1.0)
    step: float = DEFAULT_STEP
    u_cap: float | None = None
    eps: float = DEFAULT_EPS
    backend: Backend = Backend.DIRECT

    def __post_init__(self):
        if self.N < 4:
            raise ConfigurationError(f"horizon N must be at least 4, got {self.N}")
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.model.support()[0] < 0:
            raise ConfigurationError("the monitoring rule needs a nonnegative measurement model")
        if Backend.parse(self.backend) is not Backend.DIRECT:
            raise ConfigurationError(
                "the control recursion has (u, v)-dependent limits; only the direct backend applies")
        object.__setattr__(self, "backend", Backend.DIRECT)

    @property
    def window_hi(self) -> float:
        return truncation_window(self.model, self.eps)[1]

    @property
    def cap(self) -> float:
        if self.u_cap is not None:
            return self.u_cap
        return min(self.N * self.window_hi, U_CAP_LIMIT)


def lower_limit(k: int, u, v, c_star: float):
    """a_k(u, v): the smallest y_k that keeps the process running at step k."""
    return np.minimum(k / (k + 1) * (u - c_star), k * (v - u - c_star))


def control_region(p: ControlProblem, c_star: float) -> RegionSpec:
    """Closed-form cross-sections [max(0, a_k), u]."""
    def intervals(k, u, v):
        a = np.maximum(lower_limit(k, u, v, c_star), 0.0)
        return [(a, np.broadcast_to(u, a.shape))]

    def inside(k):
        return lambda u, v: (u >= 0) & (v >= u) & (u <= p.cap)

    return RegionSpec(p.N, intervals, domain12=None, domain23=inside)


def control_region_from_rule(p: ControlProblem, c_star: float) -> RegionSpec:
    """The same region assembled from the rule as linear constraints.

    X_{k+1} <= S_k / k + c  or  X_{k+2} <= S_k / k + c, with S_k = x_1+..+x_k.
    """
    def constraints(k):
        return [[Linear(-1.0 / k, p=1.0, bound=c_star)],
                [Linear(-1.0 / k, q=1.0, bound=c_star)]]

    return transform_region(p.N, constraints)


def no_stop_probability(p: ControlProblem, c_star: float) -> float:
    return evaluate(p.model, control_region(p, c_star), step_size=p.step, eps=p.eps,
                    u_window=(0.0, p.cap))


@dataclass(frozen=True)
class ControlLimit:
    c: float
    probability: float
    bracket: tuple[float, float]
    evaluations: int


def solve_control_limit(p: ControlProblem, bracket: tuple[float, float] = (0.0, 10.0),
                        tol: float = BISECTION_TOL) -> ControlLimit:
    """Bisection on c for no_stop_probability(c) = 1 - alpha."""
    target = 1.0 - p.alpha
    lo, hi = bracket
    calls = 0

    def f(c):
        nonlocal calls
        calls += 1
        return no_stop_probability(p, c)

    f_lo, f_hi = f(lo), f(hi)
    while f_hi < target and hi < p.cap:
        lo, f_lo = hi, f_hi
        hi = min(2.0 * hi, p.cap)
        f_hi = f(hi)
    if not f_lo <= target <= f_hi:
        raise RootNotBracketed(
            f"no root of P(no stop) = {target:g} in [{lo:g}, {hi:g}]: "
            f"P({lo:g}) = {f_lo:.6f}, P({hi:g}) = {f_hi:.6f}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid < target:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)
    return ControlLimit(c, f(c), (lo, hi), calls)
