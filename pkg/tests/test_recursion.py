import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parsum import (
    ConfigurationError, Exponential, NumericalFailure, UnsupportedRegionError, Weibull, distribution,
    gamma_sum_cdf, prob_tail,
)
from parsum.control import ControlProblem, control_region
from parsum.grid import trapezoid_weights
from parsum.oracle import brute_force_eq6
from parsum.recursion import (
    Linear, RecursionChain, RegionSpec, band_region, evaluate, finalize, init_g1, lattice_coords,
    step, transform_region, unconstrained,
)

E = Exponential(1.0)
BOX = dict(upper=[1.0], final=lambda u, v: (u <= 2.0) & (v <= 3.0))


def region_box3():
    return band_region(3, **BOX)


def test_region_requires_three_variables():
    with pytest.raises(ConfigurationError):
        unconstrained(2)


def test_transform_examples():
    u, v = np.array([[0.5], [2.0]]), np.array([[1.0, 4.0]])
    [(a, b)] = unconstrained(5).intervals(2, u, v)
    assert np.all(np.isneginf(a)) and np.all(np.isposinf(b))
    r = band_region(5, lower=[0.0, 0.0, 0.0], upper=[1.0, 2.5, 4.0])
    [(a, b)] = r.intervals(2, u, v)
    assert np.all(a == 0.0) and np.all(b == 2.5)
    p = ControlProblem(8)
    [(a, b)] = control_region(p, 1.0).intervals(1, np.array(3.0), np.array(5.0))
    assert float(a) == 1.0 and float(b) == 3.0


def test_linear_substitution():
    # x_{k+1} <= y/k + c with y = x_1+..+x_k, at k=2, u=3, v=5, c=1: u - y <= y/2 + 1  <=>  y >= 4/3
    a, b = Linear(-0.5, p=1.0, bound=1.0).interval(np.array(3.0), np.array(5.0))
    assert float(a) == pytest.approx(4 / 3) and np.isposinf(b)


def test_non_linear_constraint_rejected():
    r = transform_region(4, lambda k: [[lambda u, v: u]])
    with pytest.raises(UnsupportedRegionError):
        r.intervals(1, np.array(1.0), np.array(2.0))


def test_disjunction_becomes_disjoint_intervals():
    # y <= 1  or  y <= 0.5  or  y >= 3
    r = transform_region(4, lambda k: [[Linear(1.0, bound=1.0)], [Linear(1.0, bound=0.5)],
                                       [Linear(1.0, bound=3.0, ge=True)]])
    pieces = [(float(a[0]), float(b[0])) for a, b in r.intervals(1, np.array([5.0]), np.array([6.0]))]
    nonempty = sorted(p for p in pieces if p[0] <= p[1])
    assert nonempty == [(-math.inf, 1.0), (3.0, math.inf)]


def erlang_pdf(k, u):
    return u ** k * np.exp(-u) / math.factorial(k)


def test_g1_unconstrained_is_erlang():
    chain = RecursionChain((E,) * 3, 0.01, window=(0.0, 10.0))
    g1 = init_g1(chain, unconstrained(3)).g
    u = g1.grid.u_axis.abscissae()
    sel = u <= 9.5  # beyond the window the truncated factors no longer convolve to Erlang
    assert np.abs(g1.values - erlang_pdf(1, u)[:, None])[sel].max() < 1e-10


def test_g1_matches_one_dimensional_chain_away_from_origin():
    # at u = 0 the padded 1-D chain keeps a half-weight corner; the recursion gives the exact 0
    chain = RecursionChain((E,) * 3, 0.01, window=(0.0, 10.0))
    g1 = init_g1(chain, unconstrained(3)).g
    ref = distribution(E, 2, step=0.01, window=(0.0, 10.0)).density
    u = g1.grid.u_axis.abscissae()
    sel = (u > 0) & (u <= 9.5)
    diff = np.abs(g1.values - np.interp(u, ref.x, ref.values)[:, None])
    assert diff[sel].max() < 1e-12
    assert g1.values[0].max() == 0.0

def test_g1_empty_intervals():
    r = RegionSpec(3, lambda k, u, v: [(np.ones(np.broadcast(u, v).shape), np.zeros(np.broadcast(u, v).shape))])
    chain = RecursionChain((E,) * 3, 0.05, window=(0.0, 5.0))
    assert not init_g1(chain, r).g.values.any()
    assert evaluate(E, r, step_size=0.05, window=(0.0, 5.0)) == 0.0


def test_g1_band_analytic():
    chain = RecursionChain((E,) * 3, 2e-3, window=(0.0, 6.0), u_window=(0.0, 5.0))
    g1 = init_g1(chain, band_region(3, upper=[1.0])).g
    u = g1.grid.u_axis.abscissae()
    ref = np.minimum(u, 1.0) * np.exp(-u)
    assert np.abs(g1.values - ref[:, None]).max() < 1e-4


def _levels_vs_erlang(h):
    chain = RecursionChain((E,) * 5, h, window=(0.0, 10.0))
    r = unconstrained(5)
    st = init_g1(chain, r)
    errs = []
    for k in (2, 3):
        st = step(st, chain, r)
        u = st.g.grid.u_axis.abscissae()
        errs.append(np.abs(st.g.values - erlang_pdf(k, u)[:, None])[u <= 9.5].max())
    return errs


def test_step_unconstrained_is_erlang():
    e2, e3 = _levels_vs_erlang(0.01)
    assert e2 < 1e-10 and e3 < 5e-6


def test_step_error_is_second_order():
    coarse, fine = _levels_vs_erlang(0.02), _levels_vs_erlang(0.01)
    assert 3.5 < coarse[1] / fine[1] < 4.5


def test_level_two_matches_dense_quadrature():
    h = 0.02
    chain = RecursionChain((E,) * 4, h, window=(0.0, 6.0))
    r = band_region(4, upper=[1.0, 2.0])
    g2 = step(init_g1(chain, r), chain, r).g
    y = np.arange(0, int(round(6 / h)) + 1) * h
    f = lambda d: np.where(d >= 0, np.exp(-np.maximum(d, 0)), 0.0)
    Y1, Y2 = np.meshgrid(y, y, indexing="ij")
    for u in (0.5, 1.5, 2.0, 3.0):
        iu = g2.grid.u_axis.node_index(u)
        # g_2(u, .) = int over y1 <= 1, y1 <= y2 <= min(2, u) of h1(y1) h2(y2 - y1) h3(u - y2)
        dens = f(Y1) * f(Y2 - Y1) * f(u - Y2)
        mask = (Y1 <= 1 + 1e-9) & (Y2 <= 2 + 1e-9) & (Y2 >= Y1 - 1e-9) & (Y2 <= u + 1e-9)
        inner = np.sum(trapezoid_weights(mask, h, axis=0) * dens, axis=0)
        outer = np.dot(trapezoid_weights(mask.any(axis=0), h), inner)
        assert np.abs(g2.values[iu] - outer).max() < 1e-6


def test_zero_fill_outside_domain12():
    dom = lambda k: (lambda u, v: u <= 1.5)
    r = RegionSpec(4, unconstrained(4).intervals, domain12=dom)
    chain = RecursionChain((E,) * 4, 0.05, window=(0.0, 5.0))
    g = init_g1(chain, r).g
    u, v = lattice_coords(g.grid.u_axis, g.grid.v_axis)
    outside = np.broadcast_to(u > 1.5, g.values.shape)
    assert np.all(g.values[outside] == 0.0) and g.values[~outside].any()


def test_unconstrained_ten_exponentials():
    p = evaluate(E, unconstrained(10), lambda u, v: v >= 12.0, step_size=0.02,
                 window=(0.0, 30.0), u_window=(0.0, 30.0))
    assert abs(p - 0.24240) < 2e-4


def test_empty_final_mask():
    assert evaluate(E, unconstrained(3), lambda u, v: v < -1, step_size=0.05, window=(0.0, 5.0)) == 0.0


@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_unconstrained_equivalence(n):
    tau = round(0.8 * n, 6)  # the final mask boundary must sit on a node
    p = evaluate(E, unconstrained(n), lambda u, v: v >= tau, step_size=0.02,
                 window=(0.0, 30.0), u_window=(0.0, 30.0))
    ref = prob_tail(distribution(E, n, step=0.02, window=(0.0, 30.0)), tau)
    assert abs(p - ref) < 2e-4
    assert abs(p - (1 - gamma_sum_cdf(n, 1.0, tau))) < 2e-4


def test_box3_matches_brute_force():
    r = region_box3()
    rec = evaluate(E, r, step_size=0.005, window=(0.0, 3.0))
    bf = brute_force_eq6(E, r, step=0.005, window=(0.0, 3.0), span=(0.0, 3.0))
    assert abs(rec - bf) < 1e-5
    # tplquad value of the same integral
    assert abs(rec - 0.4221046730) < 1e-5


def test_band4_matches_brute_force():
    r = band_region(4, upper=[1.0, 2.0], final=lambda u, v: (u <= 3.0) & (v <= 4.0))
    rec = evaluate(Weibull(2.0, 1.0), r, step_size=0.02, window=(0.0, 4.0))
    bf = brute_force_eq6(Weibull(2.0, 1.0), r, step=0.02, window=(0.0, 4.0), span=(0.0, 4.0))
    assert abs(rec - bf) < 1e-5


def test_lower_bands_match_brute_force():
    # the brute-force lattice stops at y = 6, so the final mask does too
    r = band_region(4, lower=[0.3, 1.0], upper=[None, 3.0], final=lambda u, v: (v >= 2.5) & (v <= 6.0))
    rec = evaluate(E, r, step_size=0.02, window=(0.0, 6.0))
    bf = brute_force_eq6(E, r, step=0.02, window=(0.0, 6.0), span=(0.0, 6.0))
    assert abs(rec - bf) < 1e-5


def test_erlang3_brute_force():
    r = unconstrained(3)
    bf = brute_force_eq6(E, r, lambda u, v: v >= 2.0, step=0.02, window=(0.0, 20.0), span=(0.0, 20.0))
    assert abs(bf - 5 * math.exp(-2)) < 1e-4


def test_truncated_lower_band_matches_monte_carlo():
    # factors truncated to [0, 6], region y1 >= 0.3, 1 <= y2 <= 3, y4 >= 2.5
    rng = np.random.Generator(np.random.Philox(20240607))
    x = rng.exponential(size=(1_000_000, 4))
    y = np.cumsum(x, axis=1)
    hit = ((y[:, 0] >= 0.3) & (y[:, 1] >= 1.0) & (y[:, 1] <= 3.0) & (y[:, 3] >= 2.5)
           & (x <= 6.0).all(axis=1))
    r = band_region(4, lower=[0.3, 1.0], upper=[None, 3.0], final=lambda u, v: v >= 2.5)
    rec = evaluate(E, r, step_size=0.02, window=(0.0, 6.0))
    se = math.sqrt(hit.mean() * (1 - hit.mean()) / len(hit))
    assert abs(rec - hit.mean()) < 4 * se + 2e-4


@settings(max_examples=8)
@given(st.lists(st.floats(0.2, 4.0), min_size=3, max_size=3),
       st.lists(st.floats(0.0, 1.5), min_size=3, max_size=3))
def test_monotone_in_region(bounds, grow):
    small = band_region(4, upper=bounds[:2], final=lambda u, v: v <= bounds[2])
    big_b = [b + g for b, g in zip(bounds, grow)]
    big = band_region(4, upper=big_b[:2], final=lambda u, v: v <= big_b[2])
    opts = dict(step_size=0.05, window=(0.0, 8.0))
    p_small, p_big = evaluate(E, small, **opts), evaluate(E, big, **opts)
    assert p_big >= p_small - 1e-12
    assert 0.0 <= p_small <= 1.0 + 1e-9


def test_lattice_size_guard():
    with pytest.raises(ConfigurationError, match="too large"):
        evaluate(E, unconstrained(6), step_size=1e-3)


def test_overshoot_is_numerical_failure():
    chain = RecursionChain((E,) * 3, 0.1, window=(0.0, 3.0))
    st = init_g1(chain, unconstrained(3))
    from parsum.recursion import RecursionState
    from parsum.grid import GridFn2D
    bad = RecursionState(st.k, GridFn2D(st.g.grid, st.g.values * 2.0))
    with pytest.raises(NumericalFailure):
        finalize(bad, chain)


def test_lattice_models_rejected():
    from parsum import LatticePMF
    with pytest.raises(ConfigurationError):
        RecursionChain((LatticePMF(0.0, 1.0, (0.5, 0.5)),) * 3, 1.0)


def test_lattice_coords_exact():
    from parsum.grid import Grid1D
    u, v = lattice_coords(Grid1D(0.0, 0.1, 31), Grid1D(0.0, 0.1, 31))
    # v = 3 is represented exactly as 30 * 0.1, regardless of the (u, d) split
    hits = np.argwhere(v == 30 * 0.1)
    assert len(hits) == 31
