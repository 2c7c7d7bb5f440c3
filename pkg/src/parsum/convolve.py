"""Linear convolution of grid functions: direct summation or radix-2 FFT.

Both backends return the full support (``f.count + g.count - 1`` nodes) with
``values[k] = step * sum_j f[j] g[k - j]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, NumericalFailure
from .grid import NODE_TOL, Grid1D, GridFn1D

# Round-off below this fraction of the output scale is clamped to zero.
CLAMP_TOL = 1e-12


class Backend(str, enum.Enum):
    DIRECT = "direct"
    FFT = "fft"

    @classmethod
    def parse(cls, value) -> "Backend":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"unknown backend {value!r}; use 'direct' or 'fft'") from None


@dataclass(frozen=True, eq=False)
class Spectrum:
    coeffs: np.ndarray
    step: float = 1.0

    def __post_init__(self):
        n = len(self.coeffs)
        if n < 1 or n & (n - 1):
            raise ConfigurationError(f"spectrum length {n} is not a power of two")

    @property
    def size(self) -> int:
        return len(self.coeffs)


@lru_cache(maxsize=32)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=32)
def _twiddles(n: int) -> np.ndarray:
    w = np.exp(-2j * np.pi * np.arange(n // 2) / n)
    w.setflags(write=False)
    return w


def _radix2(a: np.ndarray, inverse: bool) -> np.ndarray:
    """Iterative decimation-in-time FFT; ``len(a)`` must be a power of two."""
    n = len(a)
    out = np.array(a, dtype=complex)[_bit_reversal(n)]
    if n == 1:
        return out
    w = _twiddles(n)
    if inverse:
        w = w.conj()
    size = 2
    while size <= n:
        half = size // 2
        blocks = out.reshape(-1, size)
        t = blocks[:, half:] * w[:: n // size]
        e = blocks[:, :half].copy()
        blocks[:, :half] += t
        blocks[:, half:] = e - t
        size *= 2
    if inverse:
        out /= n
    return out


def _check_size(size: int) -> None:
    if size < 1 or size & (size - 1):
        raise ConfigurationError(f"FFT size {size} is not a power of two")


def fft_forward(values, size: int, step: float = 1.0) -> Spectrum:
    _check_size(size)
    values = np.asarray(values)
    if len(values) > size:
        raise ConfigurationError(f"{len(values)} values do not fit an FFT of size {size}")
    padded = np.zeros(size, dtype=complex)
    padded[: len(values)] = values
    return Spectrum(_radix2(padded, inverse=False), step)


def fft_inverse(s: Spectrum) -> np.ndarray:
    return _radix2(s.coeffs, inverse=True).real


def next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _output_grid(f: GridFn1D, g: GridFn1D) -> Grid1D:
    h = f.grid.step
    if abs(g.grid.step - h) > NODE_TOL * h:
        raise ConfigurationError(
            f"grid steps differ: {f.grid.step!r} vs {g.grid.step!r}")
    count = f.grid.count + g.grid.count - 1
    try:
        return Grid1D.from_indices(f.grid.offset + g.grid.offset,
                                   f.grid.offset + g.grid.offset + count - 1, h)
    except ConfigurationError:
        return Grid1D(f.grid.origin + g.grid.origin, h, count)


def _finish(values: np.ndarray, f: GridFn1D, g: GridFn1D, grid: Grid1D) -> GridFn1D:
    if not np.all(np.isfinite(values)):
        raise NumericalFailure("convolution produced non-finite values")
    if f.values.min() >= 0 and g.values.min() >= 0:
        scale = max(1.0, float(np.abs(values).max()))
        worst = values.min()
        if worst < -CLAMP_TOL * scale:
            raise NumericalFailure(
                f"convolution of nonnegative inputs went negative ({worst:.3e})")
        values = np.maximum(values, 0.0)
    return GridFn1D(grid, values)


def convolve_direct(f: GridFn1D, g: GridFn1D) -> GridFn1D:
    grid = _output_grid(f, g)
    values = grid.step * np.convolve(f.values, g.values)
    return _finish(values, f, g, grid)


def convolve_fft(f: GridFn1D, g: GridFn1D, g_spectrum: Spectrum | None = None) -> GridFn1D:
    """FFT convolution; ``g_spectrum`` may carry a cached transform of ``g``."""
    grid = _output_grid(f, g)
    size = next_pow2(grid.count)
    if g_spectrum is None or g_spectrum.size != size:
        g_spectrum = fft_forward(g.values, size, g.grid.step)
    prod = fft_forward(f.values, size, f.grid.step).coeffs * g_spectrum.coeffs
    values = grid.step * fft_inverse(Spectrum(prod, grid.step))[: grid.count]
    return _finish(values, f, g, grid)


def convolve(f: GridFn1D, g: GridFn1D, backend: Backend | str = Backend.FFT) -> GridFn1D:
    if Backend.parse(backend) is Backend.DIRECT:
        return convolve_direct(f, g)
    return convolve_fft(f, g)
