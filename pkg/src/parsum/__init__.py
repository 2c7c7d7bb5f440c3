"""Probabilities and conditional moments of partial sums by recursive integration."""

from .convolve import Backend, convolve, convolve_direct, convolve_fft, fft_forward, fft_inverse
from .densities import (
    ONE, Exponential, Gamma, Indicator, Laplace, LatticePMF, Monomial, Normal, Weibull,
    gamma_sum_cdf, parse_distribution, pdf, sample_to_grid, truncation_window,
)
from .errors import (
    ConfigurationError, DegenerateConditioningError, DomainError, NumericalFailure,
    OracleDegenerateError, ParsumError, RootNotBracketed, UnsupportedRegionError,
)
from .grid import Grid1D, Grid2D, GridFn1D, GridFn2D, cumtrapz, integrate_2d_masked, interp_linear, trapz
from .sum_chain import (
    ChainSpec, Factor, SumDistribution, Tail, build_chain, cond_expect_pair, cond_expect_single,
    cond_expect_total, cond_prob, distribution, interval_prob, prob_tail,
)

__version__ = "0.1.0"
