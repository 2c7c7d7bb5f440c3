"""Uniform grids, grid-sampled functions and trapezoidal quadrature.

Every recursion step in the package reduces to a handful of operations on
uniformly sampled functions: a composite trapezoid integral, its running
(prefix) version, and linear interpolation of that prefix integral at
off-grid interval endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ConfigurationError, DomainError

# Relative slack used when deciding that a coordinate sits on a grid node.
NODE_TOL = 1e-9


@dataclass(frozen=True)
class Grid1D:
    origin: float
    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ConfigurationError(f"grid step must be positive, got {self.step}")
        if self.count < 2:
            raise ConfigurationError(f"grid needs at least 2 nodes, got {self.count}")
        if not math.isfinite(self.origin):
            raise ConfigurationError("grid origin must be finite")

    @classmethod
    def from_window(cls, lo: float, hi: float, step: float) -> "Grid1D":
        """Smallest grid whose nodes are integer multiples of ``step`` covering [lo, hi]."""
        if not hi > lo:
            raise ConfigurationError(f"empty window ({lo}, {hi})")
        i0 = math.floor(lo / step + NODE_TOL)
        i1 = math.ceil(hi / step - NODE_TOL)
        return cls.from_indices(i0, i1, step)

    @classmethod
    def from_indices(cls, i0: int, i1: int, step: float) -> "Grid1D":
        return cls(i0 * step, step, i1 - i0 + 1)

    @property
    def end(self) -> float:
        return self.origin + (self.count - 1) * self.step

    @property
    def offset(self) -> int:
        """Index of the first node counted from zero, when origin is step-aligned."""
        r = self.origin / self.step
        k = round(r)
        if abs(r - k) > NODE_TOL * max(1.0, abs(r)):
            raise ConfigurationError("grid origin is not a multiple of its step")
        return int(k)

    def abscissae(self) -> np.ndarray:
        return self.origin + np.arange(self.count) * self.step

    def node_index(self, x: float) -> int | None:
        """Index of the node at ``x``, or None when ``x`` is off-grid."""
        r = (x - self.origin) / self.step
        k = round(r)
        if abs(r - k) <= NODE_TOL * max(1.0, abs(r)) and 0 <= k < self.count:
            return int(k)
        return None


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridFn1D:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 1 or len(vals) != self.grid.count:
            raise ConfigurationError(
                f"expected {self.grid.count} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("grid function has non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return self.grid.abscissae()

    @property
    def step(self) -> float:
        return self.grid.step


@dataclass(frozen=True)
class Grid2D:
    u_axis: Grid1D
    v_axis: Grid1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.u_axis.count, self.v_axis.count)


@dataclass(frozen=True, eq=False)
class GridFn2D:
    """Values on a 2-D lattice; ``values[i, j]`` sits at ``(u_i, v_j)``."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.size != self.grid.shape[0] * self.grid.shape[1]:
            raise ConfigurationError(
                f"expected {self.grid.shape} values, got {vals.shape}")
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("grid function has non-finite values")
        object.__setattr__(self, "values", vals)


def _increments(values: np.ndarray, step: float) -> np.ndarray:
    return step * (values[1:] + values[:-1]) / 2.0


def cumtrapz(f: GridFn1D) -> GridFn1D:
    """Running trapezoid integral from the first node; ``result[0] == 0``."""
    out = np.zeros(f.grid.count)
    # np.cumsum accumulates strictly left to right.
    np.cumsum(_increments(f.values, f.grid.step), out=out[1:])
    return GridFn1D(f.grid, out)


def trapz(f: GridFn1D) -> float:
    # Same summation as cumtrapz so that trapz(f) == cumtrapz(f).values[-1].
    return float(np.cumsum(_increments(f.values, f.grid.step))[-1])


def interp_linear(f: GridFn1D, x: float) -> float:
    g = f.grid
    r = (x - g.origin) / g.step
    slack = NODE_TOL * max(1.0, abs(r))
    if not (-slack <= r <= g.count - 1 + slack):
        raise DomainError(
            f"x={x!r} outside grid span [{g.origin!r}, {g.end!r}]")
    k = round(r)
    if abs(r - k) <= slack:
        return float(f.values[int(k)])
    i = min(int(math.floor(r)), g.count - 2)
    t = r - i
    return float(f.values[i] * (1.0 - t) + f.values[i + 1] * t)


def interp_rows(table: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Row-wise linear interpolation at fractional column positions.

    ``table`` has shape (rows, cols); ``pos`` broadcasts against (rows, k) and
    holds fractional column indices, clipped into [0, cols - 1].
    """
    cols = table.shape[1]
    pos = np.clip(pos, 0.0, cols - 1)
    i = np.minimum(np.floor(pos).astype(np.intp), cols - 2)
    t = pos - i
    lo = np.take_along_axis(table, i, axis=1)
    hi = np.take_along_axis(table, i + 1, axis=1)
    return lo + (hi - lo) * t


def trapezoid_weights(mask: np.ndarray, step: float, axis: int = -1) -> np.ndarray:
    """Composite trapezoid weights over every run of True entries along ``axis``.

    A node strictly inside a run gets ``step``, a run endpoint ``step / 2`` and
    an isolated node 0, so the weights integrate each run of nodes exactly as
    the trapezoid rule over that run's span.
    """
    m = np.moveaxis(np.asarray(mask, dtype=float), axis, -1)
    nb = np.zeros_like(m)
    nb[..., 1:] += m[..., :-1]
    nb[..., :-1] += m[..., 1:]
    return np.moveaxis(0.5 * step * m * nb, -1, axis)


MaskLike = Union[np.ndarray, Callable[[np.ndarray, np.ndarray], np.ndarray], None]


def integrate_2d_masked(f: GridFn2D, mask: MaskLike = None) -> float:
    """Iterated trapezoid integral of ``f`` over the nodes where ``mask`` holds.

    ``mask`` is a boolean array shaped like ``f.values`` or a predicate called
    with broadcastable (u, v) coordinate arrays. Runs of masked-in nodes are
    integrated with endpoint half-weights first along v, then along u.
    """
    u = f.grid.u_axis.abscissae()[:, None]
    v = f.grid.v_axis.abscissae()[None, :]
    if mask is None:
        m = np.ones(f.grid.shape, dtype=bool)
    elif callable(mask):
        m = np.broadcast_to(np.asarray(mask(u, v), dtype=bool), f.grid.shape)
    else:
        m = np.asarray(mask, dtype=bool)
    if not m.any():
        return 0.0
    rows = np.sum(trapezoid_weights(m, f.grid.v_axis.step, axis=1) * f.values, axis=1)
    wu = trapezoid_weights(m.any(axis=1), f.grid.u_axis.step)
    return float(np.dot(wu, rows))
