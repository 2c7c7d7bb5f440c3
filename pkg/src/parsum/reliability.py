"""Lifetime of a machine whose n components are deployed one after another.

The machine fails at T = X_1 + ... + X_n where X_i is the lifetime of the
i-th component, so every quantity here is a tail or a conditional moment of
a partial sum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .convolve import Backend
from .densities import DEFAULT_EPS, DensityModel, as_models
from .errors import ConfigurationError, DegenerateConditioningError, DomainError
from .sum_chain import (
    SumDistribution, Tail, build_chain, ChainSpec, cond_expect_total,
    cond_second_moment_total, interval_prob, prob_tail,
)


class Observed(str, enum.Enum):
    OPERATING = "operating"
    FAILED = "failed"


@dataclass(frozen=True)
class MachineSpec:
    components: tuple[DensityModel, ...]
    step: float = 1e-3
    backend: Backend = Backend.FFT
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        comps = tuple(as_models(self.components))
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "backend", Backend.parse(self.backend))
        for m in comps:
            if m.support()[0] < 0:
                raise ConfigurationError(f"lifetime model {m!r} has negative support")

    @classmethod
    def iid(cls, model: DensityModel, n: int, **kw) -> "MachineSpec":
        return cls(tuple(as_models(model, n)), **kw)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def options(self) -> dict:
        return dict(step=self.step, backend=self.backend, eps=self.eps)

    def lifetime(self, count: int | None = None) -> SumDistribution:
        comps = self.components if count is None else self.components[:count]
        return build_chain(ChainSpec.of(list(comps), **self.options))


def survival(m: MachineSpec, t: float) -> float:
    """P(T >= t)."""
    return prob_tail(m.lifetime(), t, Tail.GE)


def cond_survival(m: MachineSpec, t: float, tau: float,
                  observed: Observed | str = Observed.OPERATING) -> float:
    """P(T >= t | machine state observed at tau).

    Operating at tau means T >= tau and needs t >= tau; failed by tau means
    T <= tau, giving P(t <= T <= tau) / P(T <= tau) for t <= tau.
    """
    observed = Observed(observed)
    d = m.lifetime()
    if observed is Observed.OPERATING:
        if t < tau:
            raise DomainError(f"operating at tau={tau} needs t >= tau, got t={t}")
        if t == tau:
            return 1.0
        den = prob_tail(d, tau, Tail.GE)
        if den <= 0:
            raise DegenerateConditioningError(f"P(T >= {tau}) = {den}")
        return prob_tail(d, t, Tail.GE) / den
    if t > tau:
        raise DomainError(f"failed by tau={tau} needs t <= tau, got t={t}")
    den = prob_tail(d, tau, Tail.LE)
    if den <= 0:
        raise DegenerateConditioningError(f"P(T <= {tau}) = {den}")
    return interval_prob(d, t, tau) / den


def cond_expected_failure_time(m: MachineSpec, tau: float) -> float:
    """E[T | T >= tau]."""
    return cond_expect_total(list(m.components), tau, Tail.GE, **m.options)


def cond_failure_time_variance(m: MachineSpec, tau: float) -> float:
    """Var[T | T >= tau] from single squares and pairwise products."""
    mean = cond_expected_failure_time(m, tau)
    second = cond_second_moment_total(list(m.components), tau, Tail.GE, **m.options)
    return second - mean * mean


def failed_count_tail(m: MachineSpec, i: int, tau: float) -> float:
    """P(at most i-1 components failed by tau | machine operating at tau)."""
    if not 1 <= i <= m.n - 1:
        raise DomainError(f"i must lie in [1, {m.n - 1}], got {i}")
    den = survival(m, tau)
    if den <= 0:
        raise DegenerateConditioningError(f"P(T >= {tau}) = {den}")
    return prob_tail(m.lifetime(i), tau, Tail.GE) / den
