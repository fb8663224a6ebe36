import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deconv.numerics import (
    ConvergenceError,
    InvalidValueError,
    QuadratureSpec,
    ScaledValue,
    TrigRule,
    integrate_scaled,
    panel_edges,
    scaled_add,
    scaled_mul,
    scaled_normalize,
)

mpmath.mp.dps = 40


def test_normalize_examples():
    v = scaled_normalize(ScaledValue(8.0, 8.0))
    assert v.log_scale == 10.0
    assert v.mantissa == pytest.approx(8.0 / math.e**2, rel=1e-15)
    assert scaled_normalize(ScaledValue(0.0, 5.0)) == ScaledValue(0.0, 0.0)
    assert scaled_normalize(ScaledValue(1.0, 0.0)) == ScaledValue(1.0, 0.0)


def test_normalize_rejects_nonfinite():
    with pytest.raises(InvalidValueError):
        ScaledValue(math.nan, 0.0)
    with pytest.raises(InvalidValueError):
        ScaledValue(1.0, math.inf)


def test_mul_add_examples():
    p = scaled_mul(ScaledValue(2.0, 3.0), ScaledValue(4.0, 5.0))
    assert p.log_abs() == pytest.approx(math.log(8.0) + 8.0, rel=1e-15)
    s = scaled_add(ScaledValue(1.0, 100.0), ScaledValue(1.0, 0.0))
    assert s.log_scale == 100.0
    assert s.mantissa == 1.0 + math.exp(-100.0)
    assert scaled_add(ScaledValue(1.0, 0.0), ScaledValue(-1.0, 0.0)) == ScaledValue(0.0, 0.0)


def test_to_float_overflow_and_operators():
    assert ScaledValue(1.0, 1000.0).to_float() == math.inf
    assert ScaledValue(-1.0, 1000.0).to_float() == -math.inf
    a = ScaledValue.from_float(3.0)
    assert float(a * 2.0 + 1.0 - a / 3.0) == pytest.approx(6.0)
    assert (-a).to_float() == -3.0


mant = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).filter(lambda v: abs(v) > 1e-6)
logs = st.floats(min_value=-700, max_value=700)


def _mp(v: ScaledValue):
    return mpmath.mpf(v.mantissa) * mpmath.e ** mpmath.mpf(v.log_scale)


@settings(max_examples=200, deadline=None)
@given(mant, logs)
def test_normalize_roundtrip_property(m, l):
    v = ScaledValue(m, l)
    w = scaled_normalize(v)
    assert 1.0 <= abs(w.mantissa) < math.e
    assert float(abs(_mp(w) / _mp(v) - 1)) < 1e-14
    assert w.log_scale == math.floor(w.log_scale)


@settings(max_examples=200, deadline=None)
@given(mant, logs, mant, logs)
def test_mul_matches_mpmath(m1, l1, m2, l2):
    a, b = scaled_normalize(ScaledValue(m1, l1)), scaled_normalize(ScaledValue(m2, l2))
    p = scaled_mul(a, b)
    assert float(abs(_mp(p) / (_mp(a) * _mp(b)) - 1)) < 1e-15


@settings(max_examples=200, deadline=None)
@given(mant, logs, mant, logs)
def test_add_matches_mpmath(m1, l1, m2, l2):
    a, b = scaled_normalize(ScaledValue(m1, l1)), scaled_normalize(ScaledValue(m2, l2))
    s = scaled_add(a, b)
    exact = _mp(a) + _mp(b)
    scale = max(abs(_mp(a)), abs(_mp(b)))
    # one rounding in the mantissa, relative to the larger operand
    assert float(abs(_mp(s) - exact) / scale) < 1e-15


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(node_count=1)
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(panel_strategy="spiral")


def test_integrate_examples():
    one = integrate_scaled(lambda s: (np.ones_like(s), np.zeros_like(s)), 0.0, 1.0)
    assert one.to_float() == pytest.approx(1.0, abs=1e-15)
    h = 0.1
    v = integrate_scaled(lambda s: (1.0, s * s / (2 * h * h)), 0.0, 1.0, peak="hi", scale=0.5 * h * h)
    ratio = (v / ScaledValue(h * h, 1.0 / (2 * h * h))).to_float()
    assert 0.95 <= ratio <= 1.05
    z = integrate_scaled(lambda s: (np.cos(s), 0.0), 0.0, math.pi)
    assert abs(z.to_float()) < 1e-12


def test_integrate_peaked_against_mpmath():
    h = 0.2
    v = integrate_scaled(lambda s: (1.0, s * s / (2 * h * h)), 0.0, 1.0, peak="hi", scale=0.5 * h * h)
    ref = mpmath.quad(lambda s: mpmath.e ** (s * s / (2 * h * h)), [0, 0.9, 0.99, 1])
    assert v.to_float() == pytest.approx(float(ref), rel=1e-10)


def test_integrate_convergence_failure_carries_estimate():
    spec = QuadratureSpec(node_count=2, max_refinements=1, rel_tol=1e-15, abs_tol=1e-300)
    with pytest.raises(ConvergenceError) as err:
        integrate_scaled(lambda s: (np.sqrt(s), 0.0), 0.0, 1.0, spec)
    assert err.value.estimate is not None
    assert err.value.error_bound > 0


def test_integrate_rejects_bad_domain():
    with pytest.raises(ValueError):
        integrate_scaled(lambda s: (s, 0.0), 1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-3, 3), st.floats(-3, 3),
    st.floats(0.1, 5), st.floats(0.1, 5),
)
def test_linearity(alpha, beta, fa, fb):
    def f(s):
        return np.cos(fa * s) * np.exp(-s), 0.0

    def g(s):
        return 1.0 / (1.0 + fb * s * s), 0.0

    def comb(s):
        return alpha * f(s)[0] + beta * g(s)[0], 0.0

    If, Ig = integrate_scaled(f, 0, 2), integrate_scaled(g, 0, 2)
    Ic = integrate_scaled(comb, 0, 2).to_float()
    ref = alpha * If.to_float() + beta * Ig.to_float()
    assert abs(Ic - ref) <= 10 * 1e-9 * max(1.0, abs(If.to_float()) * abs(alpha) + abs(Ig.to_float()) * abs(beta))


def test_refinement_within_error_bound():
    f = lambda s: (np.exp(np.sin(3 * s)), 0.0)  # noqa: E731
    v, err = integrate_scaled(f, 0.0, 2.0, full_output=True)
    finer = integrate_scaled(f, 0.0, 2.0, QuadratureSpec(node_count=64))
    assert abs(v.to_float() - finer.to_float()) <= max(err, 1e-14)


def test_panel_edges_geometric():
    e = panel_edges(0.0, 1.0, "geometric", "hi", 1e-3)
    assert e[0] == 0.0 and e[-1] == 1.0
    assert np.all(np.diff(e) > 0)
    assert 1.0 - e[-2] == pytest.approx(1e-3)
    u = panel_edges(0.0, 1.0, "uniform", None, None, 4)
    assert np.allclose(u, [0, 0.25, 0.5, 0.75, 1.0])


def test_trig_rule_matches_direct_integrals():
    h = 0.3

    def f(s):
        return 1.0 - s * s, s * s / (2 * h * h)

    rule = TrigRule.build(f, 0.0, 1.0, 40.0, peak="hi", scale=0.5 * h * h)
    w = np.array([0.0, 1.3, 17.0, 40.0])
    got = rule.cos(w) * math.exp(rule.log_scale)
    for wi, gi in zip(w, got):
        ref = mpmath.quad(lambda s: (1 - s * s) * mpmath.cos(wi * s) * mpmath.e ** (s * s / (2 * h * h)), mpmath.linspace(0, 1, 30))
        assert gi == pytest.approx(float(ref), rel=1e-8, abs=1e-10 * rule.l1_norm * math.exp(rule.log_scale))
