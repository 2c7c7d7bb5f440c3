import math

import numpy as np
import pytest

from parsum import ConfigurationError, Exponential, OracleDegenerateError, Weibull, gamma_sum_cdf
from parsum.control import ControlProblem
from parsum.oracle import (
    McConfig, brute_force_eq6, coordinate, draw, event, mc_conditional_expectation,
    mc_count_exact_total, mc_no_stop, mc_tail, pair, stop_times, total,
)
from parsum.recursion import band_region, unconstrained

E = Exponential(1.0)
SMALL = McConfig(samples=200_000, batch=50_000)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        McConfig(samples=0)
    with pytest.raises(ConfigurationError):
        McConfig(batch=0)
    sizes = [s for _, s in McConfig(samples=25, batch=10).batches()]
    assert sizes == [10, 10, 5]


def test_seed_determinism():
    a = mc_tail(E, 12.0, "ge", SMALL, n=10)
    b = mc_tail(E, 12.0, "ge", SMALL, n=10)
    c = mc_tail(E, 12.0, "ge", McConfig(samples=200_000, batch=50_000, seed=7), n=10)
    assert (a.value, a.std_error) == (b.value, b.std_error)
    assert a.value != c.value


def test_tail_against_gamma():
    est = mc_tail(E, 12.0, "ge", McConfig(samples=10_000_000), n=10)
    assert abs(est.z(1 - gamma_sum_cdf(10, 1.0, 12.0))) < 3
    assert est.std_error == pytest.approx(1.36e-4, rel=0.05)


def test_tail_trivial():
    est = mc_tail(E, 0.0, "ge", SMALL, n=10)
    assert est.value == 1.0 and est.z(1.0) == 0.0
    # half-count floor: sqrt(p (1 - p) / N) at p = 1 - 0.5 / N
    assert est.std_error == pytest.approx(math.sqrt(0.5) / SMALL.samples, rel=1e-4)


def test_se_scaling():
    se1 = mc_tail(E, 10.0, "ge", McConfig(samples=250_000), n=10).std_error
    se4 = mc_tail(E, 10.0, "ge", McConfig(samples=1_000_000), n=10).std_error
    assert se1 / se4 == pytest.approx(2.0, rel=0.2)


def test_conditional_expectation_examples():
    cfg = McConfig(samples=4_000_000)
    # E[X1 | T >= 10] = P(Gamma(11) >= 10) / P(Gamma(10) >= 10)
    ref = (1 - gamma_sum_cdf(11, 1.0, 10.0)) / (1 - gamma_sum_cdf(10, 1.0, 10.0))
    assert abs(mc_conditional_expectation(E, coordinate(0), 10.0, "ge", cfg, n=10).z(ref)) < 3
    one = mc_conditional_expectation(E, lambda X: np.ones(len(X)), 10.0, "ge", SMALL, n=10)
    assert one.value == 1.0 and one.std_error == 0.0


def test_conditional_expectation_weibull_total():
    w = Weibull(2.0, 1.0)
    est = mc_conditional_expectation(w, total(), 10.0, "ge", McConfig(samples=10_000_000), n=10)
    assert abs(est.value - 10.90296) < 3 * est.std_error


def test_degenerate_conditioning():
    with pytest.raises(OracleDegenerateError):
        mc_conditional_expectation(E, total(), 1e3, "ge", SMALL, n=3)


def test_weight_helpers():
    X = np.array([[1.0, 2.0, 3.0], [0.5, 0.5, 0.5]])
    np.testing.assert_array_equal(pair(0, 2)(X), [3.0, 0.25])
    np.testing.assert_array_equal(total(2)(X), [36.0, 2.25])
    np.testing.assert_array_equal(event(lo=2.0, count=2)(X), [1.0, 0.0])
    np.testing.assert_array_equal(event(hi=2.0)(X), [0.0, 1.0])


def test_draw_shape():
    X = draw([E, Weibull(2.0, 1.0)], np.random.default_rng(0), 5)
    assert X.shape == (5, 2) and np.all(X >= 0)


def test_stop_times_rule():
    # X3 and X2 exceed mean(X1) + c at n = 3
    X = np.array([[1.0, 3.0, 3.0, 0.0],
                  [1.0, 1.0, 1.0, 1.0],
                  [1.0, 0.0, 3.0, 3.0]])
    np.testing.assert_array_equal(stop_times(X, 1.0), [3, 0, 4])


def test_no_stop_trivial():
    est = mc_no_stop(ControlProblem(6), 1e6, SMALL)
    assert est.value == 1.0


def test_weighted_exact_total_estimator():
    # with c = 0 every item is satisfactory
    r, se = mc_count_exact_total(4, 0.0, E, 2.0, SMALL)
    assert r[-1] == pytest.approx(1.0, abs=1e-12) and se.max() < 1e-9
    # exponentials given T = t are uniform spacings; P(X_i >= c) = (1 - c/t)^(n-1)
    r, se = mc_count_exact_total(2, 1.0, E, 3.0, McConfig(samples=1_000_000))
    p_both = 1 / 3  # both >= 1 with X1 uniform on [0, 3]: X1 in [1, 2]
    assert abs(r[2] - p_both) < 3 * se[2]
    with pytest.raises(ConfigurationError):
        mc_count_exact_total(1, 0.0, E, 1.0, SMALL)


def test_brute_force_erlang3():
    bf = brute_force_eq6(E, unconstrained(3), lambda u, v: v >= 2.0, step=0.02,
                         window=(0.0, 20.0), span=(0.0, 20.0))
    assert abs(bf - 5 * math.exp(-2)) < 1e-4


def test_brute_force_empty_and_guard():
    assert brute_force_eq6(E, unconstrained(3), lambda u, v: v < -1, step=0.1, window=(0.0, 3.0)) == 0.0
    with pytest.raises(ConfigurationError):
        brute_force_eq6(E, unconstrained(5), step=0.1, window=(0.0, 3.0))


def test_brute_force_toy_region():
    r = band_region(4, upper=[1.0, 2.0], final=lambda u, v: (u <= 3.0) & (v <= 4.0))
    bf = brute_force_eq6(E, r, step=0.02, window=(0.0, 4.0), span=(0.0, 4.0))
    # contained in {y1 <= 1}
    assert 0.0 < bf < gamma_sum_cdf(1, 1.0, 1.0)
