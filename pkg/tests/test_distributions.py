import math

import numpy as np
import pytest
from scipy import special, stats

from deconv.distributions import (
    ConditionK,
    NoiseModel,
    TargetModel,
    convolved_density,
    make_rng,
    parse_noise,
    parse_target,
    phi_k_eval,
)


def test_condition_k_constants():
    assert NoiseModel.normal(1.0).condition_k == ConditionK(1.0, 0.0, 2.0, 2.0)
    assert NoiseModel.normal(2.0).condition_k.mu == 0.5
    ck = NoiseModel.stable(1.5, 2.0).condition_k
    assert ck.lam == 1.5 and ck.mu == pytest.approx(2.0**-1.5)
    assert NoiseModel.cauchy(1.0).condition_k.lam == 1.0
    assert NoiseModel.degenerate().condition_k is None


def test_condition_k_rejects_bad_constants():
    with pytest.raises(ValueError):
        ConditionK(0.0, 0.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        ConditionK(1.0, 0.0, 2.0, -1.0)


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseModel.stable(1.0, 1.0)
    with pytest.raises(ValueError):
        NoiseModel.stable(2.5, 1.0)
    with pytest.raises(ValueError):
        NoiseModel.normal(0.0)
    with pytest.raises(ValueError):
        NoiseModel("laplace", (1.0,))


def test_phi_k_forms():
    t = np.array([0.0, 0.5, 3.0])
    assert np.allclose(phi_k_eval(NoiseModel.normal(1.0), t), np.exp(-t * t / 2))
    assert np.allclose(phi_k_eval(NoiseModel.cauchy(2.0), t), np.exp(-2 * t))
    assert np.allclose(phi_k_eval(NoiseModel.stable(1.5, 1.0), t, log=True), -(t**1.5))
    assert phi_k_eval(NoiseModel.normal(1.0), 60.0, log=True) == -1800.0


def test_log_phi_slope_matches_finite_difference():
    for m in (NoiseModel.normal(0.7), NoiseModel.stable(1.7, 1.3), NoiseModel.cauchy(2.0)):
        t, d = 4.0, 1e-6
        fd = -(m.log_phi(t + d) - m.log_phi(t - d)) / (2 * d)
        assert m.log_phi_slope(t) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("lam", [1.3, 1.5, 1.8])
def test_stable_pdf_cdf_against_scipy(lam):
    m = NoiseModel.stable(lam, 1.0)
    x = np.array([0.0, 0.7, 2.5, 10.0, 29.0, 45.0, 300.0])
    assert np.allclose(m.pdf(x), stats.levy_stable.pdf(x, lam, 0), rtol=2e-6)
    # scipy's cdf rounds to 1 far out, so the far tail is checked against the power law
    assert np.allclose(m.cdf(x[:-1]), stats.levy_stable.cdf(x[:-1], lam, 0), rtol=2e-6, atol=1e-9)
    tail = math.gamma(lam) * math.sin(math.pi * lam / 2) / math.pi * 300.0**-lam
    assert 1 - m.cdf(300.0) == pytest.approx(tail, rel=0.05)


def test_stable_sampler_matches_cdf():
    m = NoiseModel.stable(1.5, 1.0)
    z = m.sample(20000, 7)
    _, p = stats.kstest(z, m.cdf)
    assert p > 1e-3


def test_cauchy_and_normal_samplers():
    assert stats.kstest(NoiseModel.cauchy(2.0).sample(20000, 1), stats.cauchy(scale=2.0).cdf).pvalue > 1e-3
    assert stats.kstest(NoiseModel.normal(1.5).sample(20000, 2), stats.norm(scale=1.5).cdf).pvalue > 1e-3


def test_samplers_are_seeded():
    a = NoiseModel.stable(1.5, 1.0).sample(10, 3)
    b = NoiseModel.stable(1.5, 1.0).sample(10, 3)
    assert np.array_equal(a, b)
    g = make_rng(5)
    assert make_rng(g) is g


def test_target_models():
    f = TargetModel.mixture([0.3, 0.7], [-1.0, 2.0], [0.5, 1.0])
    y = np.linspace(-5, 7, 2001)
    assert np.trapezoid(f.density(y), y) == pytest.approx(1.0, abs=1e-6)
    assert f.mean() == pytest.approx(0.3 * -1 + 0.7 * 2)
    assert f.char_fn(0.0) == pytest.approx(1.0)
    u = TargetModel.uniform(-1.0, 3.0)
    assert u.char_fn(0.7) == pytest.approx((np.exp(2.1j) - np.exp(-0.7j)) / (0.7j * 4), abs=1e-14)
    assert u.cdf(1.0) == 0.5
    with pytest.raises(ValueError):
        TargetModel.mixture([0.5, 0.4], [0, 1], [1, 1])
    with pytest.raises(ValueError):
        TargetModel.uniform(1.0, 1.0)


def test_convolved_density_closed_forms():
    f = TargetModel.normal(0.0, 1.0)
    assert convolved_density(f, NoiseModel.normal(1.0), 0.0) == pytest.approx(1 / math.sqrt(4 * math.pi))
    assert convolved_density(f, NoiseModel.cauchy(1.0), 0.5) == pytest.approx(special.voigt_profile(0.5, 1.0, 1.0))
    lo, hi = -1.0, 2.0
    u = np.array([-3.0, 0.0, 4.0])
    got = convolved_density(TargetModel.uniform(lo, hi), NoiseModel.cauchy(1.0), u)
    ref = (np.arctan(u - lo) - np.arctan(u - hi)) / (math.pi * (hi - lo))
    assert np.allclose(got, ref, rtol=1e-12)


@pytest.mark.parametrize(
    "target",
    [TargetModel.normal(0.3, 1.0), TargetModel.uniform(-1.0, 2.0), TargetModel.mixture([0.5, 0.5], [-2, 2], [1, 0.5])],
)
def test_convolution_real_space_matches_fourier(target):
    m = NoiseModel.stable(1.5, 1.0)
    u = np.linspace(-8, 8, 9)
    a = convolved_density(target, m, u)
    b = convolved_density(target, m, u, fourier=True)
    assert np.allclose(a, b, rtol=1e-7, atol=1e-12)


def test_fourier_inversion_matches_voigt():
    f = TargetModel.normal(0.0, 1.0)
    u = np.array([0.0, 1.0, 3.0])
    assert np.allclose(
        convolved_density(f, NoiseModel.cauchy(1.0), u, fourier=True), special.voigt_profile(u, 1.0, 1.0), rtol=1e-8
    )


def test_parsers():
    assert parse_noise("normal:2") == NoiseModel.normal(2.0)
    assert parse_noise("stable:1.5,2") == NoiseModel.stable(1.5, 2.0)
    assert parse_noise("cauchy") == NoiseModel.cauchy(1.0)
    assert parse_noise("none").family == "none"
    assert parse_target("uniform:-1,1") == TargetModel.uniform(-1, 1)
    assert parse_target("mix:0.5,0,1,0.5,3,1").family == "mix"
    with pytest.raises(ValueError):
        parse_noise("laplace:1")
