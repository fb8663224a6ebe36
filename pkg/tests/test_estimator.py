import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from deconv.distributions import NoiseModel, TargetModel
from deconv.estimator import (
    RangeError,
    Sample,
    cauchy_closed_form,
    cdf_lower_limit,
    centered_stats,
    cos_sin_centering,
    estimate_cdf,
    estimate_density,
    estimate_interval,
    exact_term_variance,
    expected_density,
    expected_interval,
)
from deconv.kernels import KERNELS, get_kernel, kernel_w_eval

IND = get_kernel("indicator")
N1 = NoiseModel.normal(1.0)


def test_single_observation_example():
    v = estimate_density([0.3], IND, N1, 0.5, 0.3).value.to_float()
    ref = float(mpmath.quad(lambda s: mpmath.e ** (2 * s * s), [0, 1])) / (0.5 * math.pi)
    assert v == pytest.approx(ref, rel=1e-10)
    # 1.5054 carries the rounding of the integral 2.3645
    assert v == pytest.approx(1.5054, abs=2e-4)


def test_large_bandwidth_limit():
    k = get_kernel("poly2")
    X = np.array([-0.4, 0.1, 0.9])
    v = estimate_density(X, k, N1, 100.0, 0.0).value.to_float()
    # int_0^1 (1 - s^2)^2 ds = 8/15
    ref = 8 / 15 / (math.pi * 100.0)
    assert v == pytest.approx(ref, rel=1e-3)


cases = st.tuples(
    st.lists(st.floats(-4, 4), min_size=1, max_size=6),
    st.sampled_from(sorted(KERNELS)),
    st.sampled_from([NoiseModel.normal(1.0), NoiseModel.normal(0.5), NoiseModel.stable(1.5, 1.0), NoiseModel.cauchy(1.0)]),
    st.floats(0.25, 2.0),
    st.floats(-2, 2),
)


@settings(max_examples=100, deadline=None)
@given(cases)
def test_dual_representation_density(case):
    X, name, m, h, x = case
    k = get_kernel(name)
    a = estimate_density(X, k, m, h, x)
    b = estimate_density(X, k, m, h, x, representation="direct-fourier")
    diff = abs((a.value - b.value).to_float())
    tol = 1e-8 * abs(a.value.to_float()) + 10 * (a.quadrature_error + b.quadrature_error) * math.exp(a.value.log_scale)
    assert diff <= tol


@settings(max_examples=100, deadline=None)
@given(cases, st.floats(0.1, 3.0))
def test_dual_representation_interval(case, width):
    X, name, m, h, a = case
    k = get_kernel(name)
    r1 = estimate_interval(X, k, m, h, a, a + width)
    r2 = estimate_interval(X, k, m, h, a, a + width, representation="direct-fourier")
    diff = abs((r1.value - r2.value).to_float())
    tol = 1e-8 * abs(r1.value.to_float()) + 10 * (r1.quadrature_error + r2.quadrature_error) * math.exp(r1.value.log_scale)
    assert diff <= tol


def test_interval_matches_integrated_density():
    X = np.array([-0.7, 0.2, 1.1, 1.6])
    k, h, a, b = get_kernel("poly1"), 0.5, -1.0, 1.5
    x, w = special.roots_legendre(16)
    edges = np.linspace(a, b, 201)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        pts = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * sum(wi * estimate_density(X, k, N1, h, p).value.to_float() for p, wi in zip(pts, w))
    got = estimate_interval(X, k, N1, h, a, b).value.to_float()
    assert got == pytest.approx(total, rel=1e-4)


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_noise_free_reduction(name):
    k = get_kernel(name)
    X = np.array([-1.2, 0.0, 0.4, 2.5])
    h, x = 0.3, 0.2
    got = estimate_density(X, k, NoiseModel.degenerate(), h, x).value.to_float()
    ref = float(np.mean(kernel_w_eval(k, (x - X) / h))) / h
    assert got == pytest.approx(ref, rel=1e-6)


def test_cauchy_closed_form_examples():
    for h in (0.2, 0.5, 1.0):
        v = cauchy_closed_form([0.7], h, 0.7)
        assert v.to_float() == pytest.approx((math.exp(1 / h) - 1) / math.pi, rel=1e-12)
    v = cauchy_closed_form([math.pi], 1.0, 0.0).to_float()
    assert v == pytest.approx((-1 - math.e) / (math.pi * (1 + math.pi**2)), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.floats(0.08, 1.5), st.floats(-2, 2))
def test_cauchy_closed_form_matches_estimator(X, h, x):
    a = cauchy_closed_form(X, h, x)
    r = estimate_density(X, IND, NoiseModel.cauchy(1.0), h, x)
    scale = math.exp(r.value.log_scale - a.log_scale)
    terms = sum(abs(1 / (1 + (xi - x) ** 2)) * (1 + abs(xi - x)) for xi in X) / (math.pi * len(X))
    assert abs(r.value.mantissa * scale - a.mantissa) <= 1e-8 * max(abs(a.mantissa), terms)


def test_interval_rejects_degenerate():
    with pytest.raises(ValueError):
        estimate_interval([0.0], IND, N1, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        estimate_density([], IND, N1, 0.5, 0.0)
    with pytest.raises(ValueError):
        Sample(np.array([0.0, math.nan]))


def test_range_error_for_tiny_bandwidth():
    with pytest.raises(RangeError):
        estimate_density([0.0], IND, N1, 5e-4, 0.0)


def test_cdf_rule_example():
    a = cdf_lower_limit(N1, 0.4, 0.5)
    assert a == pytest.approx(-min(0.4**-2, math.exp(0.5 / (2 * 2 * 0.16))), rel=1e-12)
    assert a == pytest.approx(-2.1842, abs=1e-4)
    with pytest.raises(ValueError):
        cdf_lower_limit(N1, 0.4, 1.0)


def test_cdf_explicit_matches_interval():
    X = np.array([0.1, -0.5, 1.2])
    r = estimate_cdf(X, IND, N1, 0.5, 1.0, a=-3.0)
    assert r.a == -3.0
    assert r.value == estimate_interval(X, IND, N1, 0.5, -3.0, 1.0).value
    r = estimate_cdf(X, IND, N1, 0.5, 1.0, delta=0.5)
    assert r.a == cdf_lower_limit(N1, 0.5, 0.5)
    with pytest.raises(ValueError):
        estimate_cdf(X, IND, N1, 0.5, 1.0, a=2.0)
    with pytest.raises(ValueError):
        estimate_cdf(X, IND, N1, 0.5, 1.0)


def test_expected_density_small_bandwidth():
    v = expected_density(TargetModel.normal(0, 1), IND, 0.05, 0.0)
    assert v == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-3)


def test_expected_interval_total_mass():
    v = expected_interval(TargetModel.normal(0, 1), IND, 0.1, -20.0, 20.0)
    assert v == pytest.approx(1.0, abs=1e-3)


def test_expected_density_matches_smoothed_target():
    # E f_nh = (w_h * f); for normal f and poly kernels compare with direct convolution
    k, h = get_kernel("poly1"), 0.4
    f = TargetModel.mixture([0.4, 0.6], [-1.0, 1.5], [0.5, 0.8])
    x, w = special.roots_legendre(64)
    edges = np.linspace(-60, 60, 241)
    tot = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        tot += 0.5 * (hi - lo) * np.sum(w * kernel_w_eval(k, v) * f.density(0.3 - h * v))
    assert expected_density(f, k, h, 0.3) == pytest.approx(tot, rel=1e-6)


def test_mc_mean_matches_expectation():
    f, h, x, n, M = TargetModel.normal(0, 1), 0.5, 0.2, 500, 2000
    rng = np.random.Generator(np.random.Philox(11))
    vals = np.empty(M)
    for i in range(M):
        X = f.sample(n, rng) + N1.sample(n, rng)
        vals[i] = estimate_density(X, IND, N1, h, x).value.to_float()
    se = vals.std(ddof=1) / math.sqrt(M)
    assert abs(vals.mean() - expected_density(f, IND, h, x)) < 3 * se


def test_exact_variance_matches_mc():
    f, h, x, n, M = TargetModel.normal(0, 1), 0.5, 0.0, 200, 3000
    rng = np.random.Generator(np.random.Philox(3))
    vals = np.empty(M)
    for i in range(M):
        X = f.sample(n, rng) + N1.sample(n, rng)
        vals[i] = estimate_density(X, IND, N1, h, x).value.to_float()
    exact = exact_term_variance(f, N1, IND, h, x).to_float()
    assert exact > 0 and math.isfinite(exact)
    assert n * vals.var(ddof=1) == pytest.approx(exact, rel=0.1)


def test_centered_stats():
    f = TargetModel.normal(0, 1)
    ec, es = cos_sin_centering(f, N1, 0.0, 0.05)
    assert abs(ec) < 1e-100 and abs(es) < 1e-100
    assert centered_stats([], 0.1, 0.0, (0.0, 0.0)) == (0.0, 0.0, None)
    X = np.array([0.1, 0.5])
    U, V, S = centered_stats(X, 0.2, (-1.0, 1.0), (0.1, 0.0))
    assert S == U
    assert U == pytest.approx((np.cos(X / 0.2).sum() - 0.2) / math.sqrt(2))
