"""Distribution models, weight functions and grid sampling.

Continuous densities are sampled point-wise, except at nodes that coincide
with a jump of the integrand (a support edge such as 0 for the exponential, or
an indicator threshold). Interior jump nodes receive the average of the two
one-sided limits, which keeps the composite trapezoid rule second order
across the discontinuity; a jump on the first or last node receives the
inward limit. Lattice distributions are carried as spikes of height
``mass / step``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import ConfigurationError
from .grid import NODE_TOL, Grid1D, GridFn1D

DEFAULT_EPS = 1e-12


class DensityModel:
    """Common interface of every distribution kind."""

    is_lattice = False

    def pdf(self, x):
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def jumps(self) -> tuple[float, ...]:
        """Points where the density is discontinuous."""
        return ()

    def window(self, eps: float) -> tuple[float, float]:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError


def _check_positive(**params):
    for name, value in params.items():
        if not (value > 0 and math.isfinite(value)):
            raise ConfigurationError(f"{name} must be a positive finite number, got {value}")


@dataclass(frozen=True)
class Exponential(DensityModel):
    rate: float = 1.0

    def __post_init__(self):
        _check_positive(rate=self.rate)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def support(self):
        return (0.0, math.inf)

    def jumps(self):
        return (0.0,)

    def window(self, eps):
        return (0.0, -math.log(eps) / self.rate)

    def mean(self):
        return 1.0 / self.rate

    def variance(self):
        return 1.0 / self.rate ** 2

    def sample(self, rng, size):
        return -np.log1p(-rng.random(size)) / self.rate


@dataclass(frozen=True)
class Weibull(DensityModel):
    shape: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        _check_positive(shape=self.shape, scale=self.scale)

    def pdf(self, x):
        k, lam = self.shape, self.scale
        z = np.maximum(np.asarray(x, dtype=float), 0.0) / lam
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dens = (k / lam) * z ** (k - 1) * np.exp(-z ** k)
        return np.where(np.asarray(x) >= 0, dens, 0.0)

    def support(self):
        return (0.0, math.inf)

    def jumps(self):
        return (0.0,) if self.shape <= 1 else ()

    def window(self, eps):
        return (0.0, self.scale * (-math.log(eps)) ** (1.0 / self.shape))

    def mean(self):
        return self.scale * math.gamma(1 + 1 / self.shape)

    def variance(self):
        g1 = math.gamma(1 + 1 / self.shape)
        return self.scale ** 2 * (math.gamma(1 + 2 / self.shape) - g1 ** 2)

    def sample(self, rng, size):
        return self.scale * (-np.log1p(-rng.random(size))) ** (1.0 / self.shape)


@dataclass(frozen=True)
class Laplace(DensityModel):
    """Double exponential centred at 0: ``rate/2 * exp(-rate |x|)``."""

    rate: float = 1.0

    def __post_init__(self):
        _check_positive(rate=self.rate)

    def pdf(self, x):
        return 0.5 * self.rate * np.exp(-self.rate * np.abs(np.asarray(x, dtype=float)))

    def support(self):
        return (-math.inf, math.inf)

    def window(self, eps):
        # eps/2 in each tail: exp(-rate x) / 2 = eps / 2
        hi = -math.log(eps) / self.rate
        return (-hi, hi)

    def mean(self):
        return 0.0

    def variance(self):
        return 2.0 / self.rate ** 2

    def sample(self, rng, size):
        u = rng.random(size) - 0.5
        return -np.sign(u) * np.log1p(-2.0 * np.abs(u)) / self.rate


@dataclass(frozen=True)
class Normal(DensityModel):
    mu: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        _check_positive(sd=self.sd)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2 * math.pi))

    def support(self):
        return (-math.inf, math.inf)

    def window(self, eps):
        half = -special.ndtri(eps / 2) * self.sd
        return (self.mu - half, self.mu + half)

    def mean(self):
        return self.mu

    def variance(self):
        return self.sd ** 2

    def sample(self, rng, size):
        # Marsaglia polar method, vectorised with rejection top-ups.
        n = int(np.prod(size))
        out = np.empty(n)
        filled = 0
        while filled < n:
            m = max(16, int(1.3 * (n - filled) / 2) + 8)
            a = 2.0 * rng.random(m) - 1.0
            b = 2.0 * rng.random(m) - 1.0
            s = a * a + b * b
            ok = (s > 0) & (s < 1)
            a, b, s = a[ok], b[ok], s[ok]
            fac = np.sqrt(-2.0 * np.log(s) / s)
            z = np.concatenate([a * fac, b * fac])[: n - filled]
            out[filled:filled + len(z)] = z
            filled += len(z)
        return (self.mu + self.sd * out).reshape(size)


@dataclass(frozen=True)
class Gamma(DensityModel):
    """Reference distribution for sums of exponentials; not needed by the chains."""

    shape: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        _check_positive(shape=self.shape, scale=self.scale)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(x, 0.0) / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            logd = (self.shape - 1) * np.log(z) - z - special.gammaln(self.shape)
            dens = np.exp(logd) / self.scale
        if self.shape == 1:
            dens = np.exp(-z) / self.scale
        return np.where(x >= 0, dens, 0.0)

    def support(self):
        return (0.0, math.inf)

    def jumps(self):
        return (0.0,) if self.shape <= 1 else ()

    def window(self, eps):
        return (0.0, self.scale * special.gammainccinv(self.shape, eps))

    def mean(self):
        return self.shape * self.scale

    def variance(self):
        return self.shape * self.scale ** 2

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)


@dataclass(frozen=True)
class LatticePMF(DensityModel):
    origin: float
    pitch: float
    masses: tuple[float, ...]

    is_lattice = True

    def __post_init__(self):
        _check_positive(pitch=self.pitch)
        m = tuple(float(v) for v in self.masses)
        object.__setattr__(self, "masses", m)
        if not m or any(v < 0 or not math.isfinite(v) for v in m):
            raise ConfigurationError("lattice masses must be nonnegative and finite")
        if abs(sum(m) - 1.0) > 1e-12:
            raise ConfigurationError(f"lattice masses sum to {sum(m)!r}, not 1")

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.pitch * np.arange(len(self.masses))

    def pmf(self, x):
        x = np.asarray(x, dtype=float)
        r = (x - self.origin) / self.pitch
        k = np.rint(r)
        on = (np.abs(r - k) <= NODE_TOL * np.maximum(1.0, np.abs(r))) & (k >= 0) & (k < len(self.masses))
        idx = np.where(on, k, 0).astype(int)
        return np.where(on, np.asarray(self.masses)[idx], 0.0)

    # A lattice has no density; pdf returns the mass at lattice points.
    pdf = pmf

    def support(self):
        nz = [i for i, v in enumerate(self.masses) if v > 0]
        return (self.origin + nz[0] * self.pitch, self.origin + nz[-1] * self.pitch)

    def window(self, eps):
        return self.support()

    def mean(self):
        return float(np.dot(self.points, self.masses))

    def variance(self):
        return float(np.dot(self.points ** 2, self.masses)) - self.mean() ** 2

    def sample(self, rng, size):
        return rng.choice(self.points, size=size, p=np.asarray(self.masses))


def pdf(model: DensityModel, x):
    """Density (or lattice mass) of ``model`` at ``x``; 0 outside the support."""
    out = model.pdf(x)
    return float(out) if np.ndim(out) == 0 else out


def truncation_window(model: DensityModel, eps: float = DEFAULT_EPS) -> tuple[float, float]:
    if not 0 < eps < 1:
        raise ConfigurationError(f"eps must lie in (0, 1), got {eps}")
    lo, hi = model.window(eps)
    return (float(lo), float(hi))


# -- weights -----------------------------------------------------------------

class WeightFn:
    def __call__(self, x):
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def __mul__(self, other: "WeightFn") -> "WeightFn":
        return Product((self, other))


@dataclass(frozen=True)
class One(WeightFn):
    def __call__(self, x):
        return np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Monomial(WeightFn):
    power: float = 1.0

    def __post_init__(self):
        if self.power < 0:
            raise ConfigurationError("monomial power must be nonnegative")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.power == 0:
            return np.ones_like(x)
        return x ** self.power


@dataclass(frozen=True)
class Indicator(WeightFn):
    """``1{x >= threshold}`` (``ge=True``) or ``1{x < threshold}``.

    The boundary point itself belongs to the ``>=`` side.
    """

    threshold: float
    ge: bool = True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        hit = x >= self.threshold if self.ge else x < self.threshold
        return hit.astype(float)

    def breakpoints(self):
        return (self.threshold,)


@dataclass(frozen=True)
class Product(WeightFn):
    factors: tuple[WeightFn, ...] = field(default_factory=tuple)

    def __call__(self, x):
        out = np.ones_like(np.asarray(x, dtype=float))
        for f in self.factors:
            out = out * f(x)
        return out

    def breakpoints(self):
        return tuple(b for f in self.factors for b in f.breakpoints())


ONE = One()


def sample_to_grid(model: DensityModel, weight: WeightFn | None, window: tuple[float, float],
                   step: float) -> GridFn1D:
    """Sample ``weight(x) * pdf(x)`` on the step-aligned grid covering ``window``."""
    weight = ONE if weight is None else weight
    lo, hi = window
    if not hi > lo:
        raise ConfigurationError(f"empty sampling window {window}")
    if not step > 0:
        raise ConfigurationError(f"step must be positive, got {step}")
    grid = Grid1D.from_window(lo, hi, step)
    x = grid.abscissae()
    if model.is_lattice:
        return GridFn1D(grid, _lattice_values(model, weight, grid))
    with np.errstate(invalid="ignore"):
        vals = np.asarray(weight(x), dtype=float) * np.asarray(model.pdf(x), dtype=float)
    for c in sorted(set(model.jumps()) | set(weight.breakpoints())):
        k = grid.node_index(c)
        if k is None:
            continue
        d = 1e-9 * max(1.0, abs(c))
        left = float(weight(c - d) * model.pdf(c - d))
        right = float(weight(c + d) * model.pdf(c + d))
        if k == 0:
            vals[k] = right
        elif k == grid.count - 1:
            vals[k] = left
        else:
            vals[k] = 0.5 * (left + right)
    if not np.all(np.isfinite(vals)):
        raise ConfigurationError(f"{model} has a non-finite density on {window}")
    return GridFn1D(grid, vals)


def _lattice_values(model: LatticePMF, weight: WeightFn, grid: Grid1D) -> np.ndarray:
    ratio = model.pitch / grid.step
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
        raise ConfigurationError(
            f"grid step {grid.step} does not divide lattice pitch {model.pitch}")
    vals = np.zeros(grid.count)
    for x, m in zip(model.points, model.masses):
        if m == 0:
            continue
        k = grid.node_index(float(x))
        if k is None:
            raise ConfigurationError(
                f"lattice point {x} is not a node of the sampling grid")
        vals[k] += float(weight(x)) * m / grid.step
    return vals


def gamma_sum_cdf(n: int, rate: float, tau: float) -> float:
    """P(X_1 + ... + X_n <= tau) for iid Exponential(rate) summands."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    _check_positive(rate=rate)
    if tau <= 0:
        return 0.0
    x = rate * tau
    term, total = 1.0, 1.0
    for k in range(1, n):
        term *= x / k
        total += term
    return 1.0 - math.exp(-x) * total


# -- distribution strings ----------------------------------------------------

_KINDS = {
    "exp": ("exp", "exponential"),
    "weibull": ("weibull",),
    "laplace": ("laplace", "doubleexp"),
    "normal": ("normal", "gauss", "gaussian"),
    "gamma": ("gamma",),
    "pmf": ("pmf", "lattice"),
}


def parse_distribution(text: str) -> DensityModel:
    """Parse strings such as ``exp:rate=1`` or ``pmf:origin=0,step=1,masses=0.5;0.5``."""
    m = re.fullmatch(r"\s*([A-Za-z]+)\s*(?::(.*))?", text or "")
    if not m:
        raise ConfigurationError(f"cannot parse distribution {text!r}")
    name = m.group(1).lower()
    kind = next((k for k, names in _KINDS.items() if name in names), None)
    if kind is None:
        raise ConfigurationError(f"unknown distribution kind {m.group(1)!r}")
    params = {}
    for item in filter(None, (s.strip() for s in (m.group(2) or "").split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"expected key=value, got {item!r}")
        params[key.strip().lower()] = value.strip()

    def num(key, default=None, *aliases):
        for k in (key, *aliases):
            if k in params:
                try:
                    return float(params.pop(k))
                except ValueError:
                    raise ConfigurationError(f"bad number for {k}: {params.get(k)!r}") from None
        if default is None:
            raise ConfigurationError(f"{kind} needs parameter {key!r}")
        return default

    if kind == "exp":
        model = Exponential(num("rate", 1.0, "lambda"))
    elif kind == "weibull":
        model = Weibull(num("shape", 1.0, "k"), num("scale", 1.0))
    elif kind == "laplace":
        model = Laplace(num("rate", 1.0, "lambda"))
    elif kind == "normal":
        model = Normal(num("mean", 0.0, "mu"), num("sd", 1.0, "sigma", "stddev"))
    elif kind == "gamma":
        model = Gamma(num("shape", 1.0), num("scale", 1.0))
    else:
        if "masses" not in params:
            raise ConfigurationError("pmf needs masses=m0;m1;...")
        try:
            masses = tuple(float(s) for s in params.pop("masses").split(";") if s.strip())
        except ValueError:
            raise ConfigurationError("pmf masses must be numbers") from None
        model = LatticePMF(num("origin", 0.0), num("step", 1.0, "pitch"), masses)
    if params:
        raise ConfigurationError(f"unknown parameters for {kind}: {sorted(params)}")
    return model


def as_models(models: DensityModel | Sequence[DensityModel], n: int | None = None) -> list[DensityModel]:
    if isinstance(models, DensityModel):
        if n is None:
            raise ConfigurationError("n is required with a single model")
        return [models] * n
    return list(models)
