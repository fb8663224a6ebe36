import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from deconv.kernels import (
    KERNELS,
    EstimationError,
    KernelSpec,
    condition_w_params,
    get_kernel,
    kernel_w_eval,
    phi_w_eval,
    polynomial_kernel,
)


def test_phi_w_examples():
    assert phi_w_eval(get_kernel("indicator"), 0.5) == 1.0
    for k in KERNELS.values():
        assert phi_w_eval(k, 0.0) == 1.0
    assert phi_w_eval(polynomial_kernel(3), 0.5) == pytest.approx(0.421875, rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(sorted(KERNELS)), st.floats(-3, 3))
def test_phi_w_symmetric_and_supported(name, t):
    k = get_kernel(name)
    assert phi_w_eval(k, t) == phi_w_eval(k, -t)
    if abs(t) > 1:
        assert phi_w_eval(k, t) == 0.0


def test_condition_w_recovers_constants():
    A, al, res = condition_w_params(get_kernel("indicator"))
    assert (A, al) == pytest.approx((1.0, 0.0), abs=1e-12)
    for m in (1, 2, 3):
        A, al, res = condition_w_params(polynomial_kernel(m))
        assert A == pytest.approx(2.0**m, rel=1e-4)
        assert al == pytest.approx(m, abs=1e-4)
        assert res < 1e-5


def test_declared_constants_match_fit():
    for k in KERNELS.values():
        A, al, _ = condition_w_params(k)
        assert A == pytest.approx(k.A, rel=1e-3)
        assert al == pytest.approx(k.alpha, abs=1e-3)


def test_condition_w_rejects_vanishing_edge():
    k = KernelSpec("bad", lambda t: np.where(t > 0.99, 0.0, 1.0), 1.0, 0.0)
    with pytest.raises(EstimationError):
        condition_w_params(k)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("x", lambda t: t, 0.0, 0.0)
    with pytest.raises(ValueError):
        KernelSpec("x", lambda t: t, 1.0, -1.0)
    with pytest.raises(ValueError):
        get_kernel("nope")


@pytest.mark.parametrize("name", ["poly1", "poly2", "poly3"])
@pytest.mark.parametrize("x", [0.0, 1.0, 7.5, -20.0])
def test_kernel_w_against_scipy(name, x):
    k = get_kernel(name)
    ref, _ = integrate.quad(lambda s: math.cos(s * x) * k.phi(s), 0, 1, limit=200, epsabs=1e-14)
    assert kernel_w_eval(k, x) == pytest.approx(ref / math.pi, abs=1e-12)


def test_indicator_w_closed_form():
    k = get_kernel("indicator")
    x = np.array([0.0, 0.3, 5.0])
    assert np.allclose(kernel_w_eval(k, x), [1 / math.pi, math.sin(0.3) / (0.3 * math.pi), math.sin(5) / (5 * math.pi)])


def test_kernel_w_integrates_to_one():
    k = get_kernel("poly2")
    # w decays like x^-3 for poly2, the tail beyond 400 is below 1e-5
    x = np.linspace(-400, 400, 160001)
    w = kernel_w_eval(k, x)
    assert np.trapezoid(w, x) == pytest.approx(1.0, abs=1e-4)
