"""Kernel deconvolution estimators of density, interval probability and cdf.

After substituting s = h t every estimator is an average over observations
of an integral on [0, 1] whose weight phi_w(s) / phi_k(s / h) grows like
exp(s**lam / (mu h**lam)).  That weight is handled in log space by
:class:`~deconv.numerics.TrigRule`, so one rule serves all observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import NoiseModel, TargetModel, convolved_density
from .kernels import KernelSpec, phi_w_eval
from .numerics import (
    DEFAULT_SPEC,
    ConvergenceError,
    QuadratureSpec,
    ScaledValue,
    TrigRule,
    composite_rule,
    integrate_scaled,
    panel_edges,
    scaled_normalize,
)

__all__ = [
    "EstimateResult",
    "RangeError",
    "Sample",
    "cauchy_closed_form",
    "cdf_lower_limit",
    "centered_stats",
    "cos_sin_centering",
    "estimate_cdf",
    "estimate_density",
    "estimate_interval",
    "exact_interval_variance",
    "exact_term_variance",
    "expected_density",
    "expected_interval",
    "term_rule",
]

MAX_LOG_SCALE = 1e6
SERIES_SWITCH = 1e-8


class RangeError(ArithmeticError):
    """The exponential weight exceeds the configured log-scale bound."""


@dataclass(frozen=True)
class Sample:
    observations: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.observations, dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            raise ValueError("observations must be finite")
        object.__setattr__(self, "observations", x)

    @property
    def n(self) -> int:
        return self.observations.size


def _as_sample(s) -> Sample:
    return s if isinstance(s, Sample) else Sample(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class EstimateResult:
    """An estimate in scaled form.

    ``quadrature_error`` is an absolute error bound in units of
    ``exp(value.log_scale)``, i.e. directly comparable to the mantissa.
    """

    value: ScaledValue
    representation_used: str
    quadrature_error: float
    a: Optional[float] = None

    def to_float(self) -> float:
        return self.value.to_float()


def _peak_scale(noise: NoiseModel, h: float) -> Optional[float]:
    slope = noise.log_phi_slope(1.0 / h) / h  # d/ds of -log phi_k(s/h) at s = 1
    if slope <= 2.0:
        return None
    return 0.5 / slope


def _check_range(log_scale: float, bound: float = MAX_LOG_SCALE):
    if abs(log_scale) > bound:
        raise RangeError(f"log-scale {log_scale:.4g} exceeds bound {bound:.4g}; bandwidth too small")


def term_rule(
    kernel: KernelSpec,
    noise: NoiseModel,
    h: float,
    max_freq: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    half_width: Optional[float] = None,
) -> TrigRule:
    """Rule for the per-observation integrals on [0, 1].

    Without ``half_width`` it represents
    ``int cos(w s) phi_w(s) / phi_k(s/h) ds``; with ``half_width = c`` it
    represents ``int cos(w s) sin(c s) / s * phi_w(s) / phi_k(s/h) ds``.
    Valid for frequencies ``|w| <= max_freq``.
    """
    if not h > 0:
        raise ValueError("bandwidth h must be positive")
    _check_range(-noise.log_phi(1.0 / h))
    if half_width is None:

        def f(s):
            return phi_w_eval(kernel, s), -noise.log_phi(s / h)

        extra = 0.0
    else:
        c = float(half_width)

        def f(s):
            ratio = np.where(s < SERIES_SWITCH, c, np.sin(c * s) / np.where(s < SERIES_SWITCH, 1.0, s))
            return ratio * phi_w_eval(kernel, s), -noise.log_phi(s / h)

        extra = c
    return TrigRule.build(
        f, 0.0, 1.0, max_freq, spec, peak="hi", scale=_peak_scale(noise, h), extra_freq=extra
    )


def _finish(total_mantissa, log_scale, prefactor, err, rep):
    value = scaled_normalize(ScaledValue(total_mantissa * prefactor, log_scale))
    _check_range(value.log_scale)
    shift = math.exp(log_scale - value.log_scale) if value.mantissa else 1.0
    return EstimateResult(value, rep, abs(prefactor) * err * shift)


def estimate_density(
    s,
    k: KernelSpec,
    m: NoiseModel,
    h: float,
    x: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    representation: str = "cosine-sum",
) -> EstimateResult:
    """f_nh(x) = 1/(pi n h) sum_j int_0^1 cos(s (X_j - x)/h) phi_w(s) / phi_k(s/h) ds."""
    s = _as_sample(s)
    if s.n < 1:
        raise ValueError("need at least one observation")
    if representation == "direct-fourier":
        return _direct_density(s, k, m, h, x, spec)
    if representation != "cosine-sum":
        raise ValueError(f"unknown representation {representation!r}")
    freqs = (s.observations - x) / h
    rule = term_rule(k, m, h, float(np.max(np.abs(freqs))), spec)
    terms = rule.cos(freqs)
    return _finish(float(np.sum(terms)), rule.log_scale, 1.0 / (math.pi * s.n * h), s.n * rule.error, "cosine-sum")


def _check_interval(a, b, h):
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if not h > 0:
        raise ValueError("bandwidth h must be positive")


def estimate_interval(
    s,
    k: KernelSpec,
    m: NoiseModel,
    h: float,
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    representation: str = "cosine-sum",
) -> EstimateResult:
    """F_nh(a, b), the integral of f_nh over [a, b].

    Single-integral form
    2/(pi n) sum_j int_0^1 cos(s (X_j - mid)/h) sin(s (b - a)/(2h)) / s * phi_w / phi_k ds.
    """
    _check_interval(a, b, h)
    s = _as_sample(s)
    if s.n < 1:
        raise ValueError("need at least one observation")
    if representation == "direct-fourier":
        return _direct_interval(s, k, m, h, a, b, spec)
    if representation != "cosine-sum":
        raise ValueError(f"unknown representation {representation!r}")
    mid, c = 0.5 * (a + b), (b - a) / (2.0 * h)
    freqs = (s.observations - mid) / h
    rule = term_rule(k, m, h, float(np.max(np.abs(freqs))), spec, half_width=c)
    terms = rule.cos(freqs)
    return _finish(float(np.sum(terms)), rule.log_scale, 2.0 / (math.pi * s.n), s.n * rule.error, "cosine-sum")


def cdf_lower_limit(m: NoiseModel, h: float, delta: float) -> float:
    """Lower limit a = -min(h**-lam, exp((1 - delta) / (2 mu h**lam))).

    Along any h -> 0 this gives a h**(lam - 1) -> -inf and
    a = o(exp((1 - delta) / (mu h**lam))).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    ck = m.condition_k
    if ck is None:
        raise ValueError("the cdf rule needs a noise law with Condition-K constants")
    hl = h**ck.lam
    e = (1.0 - delta) / (2.0 * ck.mu * hl)
    return -min(1.0 / hl, math.exp(e) if e < 700 else math.inf)


def estimate_cdf(
    s,
    k: KernelSpec,
    m: NoiseModel,
    h: float,
    b: float,
    a: Optional[float] = None,
    delta: Optional[float] = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> EstimateResult:
    """Estimate F(b) as F_nh(a, b) with an explicit ``a`` or the ``delta`` rule."""
    if (a is None) == (delta is None):
        raise ValueError("give exactly one of a or delta")
    if a is None:
        a = cdf_lower_limit(m, h, delta)
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    res = estimate_interval(s, k, m, h, a, b, spec)
    return EstimateResult(res.value, res.representation_used, res.quadrature_error, a)


def cauchy_closed_form(s, h: float, x: float) -> ScaledValue:
    """f_nh(x) for Cauchy(1) noise and the indicator kernel, in closed form.

    1/(pi n) sum_j [-1 + e^{1/h} (cos(d_j/h) + d_j sin(d_j/h))] / (1 + d_j**2),
    d_j = X_j - x, with e^{1/h} kept as a log scale.
    """
    s = _as_sample(s)
    if s.n == 0:
        return ScaledValue(0.0, 0.0)
    d = s.observations - x
    inner = (np.cos(d / h) + d * np.sin(d / h) - math.exp(-1.0 / h)) / (1.0 + d * d)
    return scaled_normalize(ScaledValue(float(np.sum(inner)) / (math.pi * s.n), 1.0 / h))


# ---------------------------------------------------------------------------
# Direct Fourier representation (t-space, complex, both half-lines)
# ---------------------------------------------------------------------------


def _direct(s, k, m, h, spec, factor):
    """(1/2pi) int_{-1/h}^{1/h} factor(t) phi_w(ht) phi_emp(t) / phi_k(t) dt, real part."""
    lim = 1.0 / h
    X = s.observations
    slope = m.log_phi_slope(lim)
    scale = 0.5 / slope if slope * lim > 2 else None
    spread = float(np.max(X) - np.min(X)) + 1.0
    edges = panel_edges(-lim, lim, spec.panel_strategy, "both", scale)
    # |t|**lam is not smooth at the origin, so break there
    edges = np.union1d(edges, [0.0])
    prev, err, top = None, math.inf, None
    for level in range(spec.max_refinements + 1):
        t, w = composite_rule(edges, spec.node_count * 2**level, spread + factor.freq)
        logw = -m.log_phi(t)
        if top is None:
            top = float(np.max(logw))
        arg = np.multiply.outer(X, t)
        emp = np.cos(arg).mean(axis=0) + 1j * np.sin(arg).mean(axis=0)
        vals = factor(t) * emp * phi_w_eval(k, h * t) * np.exp(logw - top)
        total = complex(np.sum(w * vals)) / (2 * math.pi)
        if prev is not None:
            err = abs(total - prev)
            if err <= max(spec.abs_tol, spec.rel_tol * abs(total)):
                return total, top, err
        prev = total
    raise ConvergenceError("direct Fourier quadrature stalled", error_bound=err)


def _direct_density(s, k, m, h, x, spec):
    def factor(t):
        return np.exp(-1j * t * x)

    factor.freq = abs(x)
    total, top, err = _direct(s, k, m, h, spec, factor)
    return _finish(total.real, top, 1.0, err, "direct-fourier")


def _direct_interval(s, k, m, h, a, b, spec):
    def factor(t):
        return (np.exp(-1j * t * a) - np.exp(-1j * t * b)) / (1j * t)

    factor.freq = max(abs(a), abs(b))
    total, top, err = _direct(s, k, m, h, spec, factor)
    return _finish(total.real, top, 1.0, err, "direct-fourier")


# ---------------------------------------------------------------------------
# Expectations and exact variances
# ---------------------------------------------------------------------------


def expected_density(f: TargetModel, k: KernelSpec, h: float, x: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """E f_nh(x) = 1/(pi h) int_0^1 Re[exp(-isx/h) phi_f(s/h)] phi_w(s) ds.

    The noise cancels, so this is the mean of an ordinary kernel estimate.
    """
    if not h > 0:
        raise ValueError("bandwidth h must be positive")

    def g(s):
        return (np.exp(-1j * s * x / h) * f.char_fn(s / h)).real * phi_w_eval(k, s), 0.0

    v = integrate_scaled(g, 0.0, 1.0, spec, frequency=abs(x) / h + _target_freq(f, h))
    return v.to_float() / (math.pi * h)


def _target_freq(f: TargetModel, h: float) -> float:
    if f.family == "uniform":
        return max(abs(f.params[0]), abs(f.params[1])) / h
    return float(np.max(np.abs(f._components()[1]))) / h


def expected_interval(
    f: TargetModel, k: KernelSpec, h: float, a: float, b: float, spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """E F_nh(a, b) = 1/pi int_0^1 Re[(e^{-isa/h} - e^{-isb/h}) / (is) phi_f(s/h)] phi_w(s) ds."""
    _check_interval(a, b, h)

    def g(s):
        al, be = s * a / h, s * b / h
        phi = f.char_fn(s / h)
        safe = np.where(s < SERIES_SWITCH, 1.0, s)
        re = ((np.sin(be) - np.sin(al)) * phi.real + (np.cos(al) - np.cos(be)) * phi.imag) / safe
        re = np.where(s < SERIES_SWITCH, (b - a) / h * phi.real, re)
        return re * phi_w_eval(k, s), 0.0

    freq = max(abs(a), abs(b)) / h + _target_freq(f, h)
    v = integrate_scaled(g, 0.0, 1.0, spec, frequency=freq, panels=max(1, int(freq // 50)))
    return v.to_float() / math.pi


def cos_sin_centering(f: TargetModel, m: NoiseModel, x: float, h: float):
    """(E cos((X - x)/h), E sin((X - x)/h)) from phi_g = phi_f phi_k at 1/h."""
    z = np.exp(-1j * x / h) * f.char_fn(1.0 / h) * m.phi(1.0 / h)
    return float(z.real), float(z.imag)


def centered_stats(s, h: float, point, centering):
    """Normalized centered cosine and sine sums.

    ``point`` is x or an interval (a, b); ``centering`` is
    (E cos, E sin) at the evaluation point, see :func:`cos_sin_centering`.
    Returns (U, V, S); S is U at the midpoint for an interval, else None.
    """
    s = _as_sample(s)
    if isinstance(point, tuple):
        a, b = point
        x = 0.5 * (a + b)
    else:
        x = float(point)
    if s.n == 0:
        return 0.0, 0.0, (0.0 if isinstance(point, tuple) else None)
    ec, es = centering
    d = (s.observations - x) / h
    root = math.sqrt(s.n)
    U = float(np.sum(np.cos(d) - ec)) / root
    V = float(np.sum(np.sin(d) - es)) / root
    return U, V, (U if isinstance(point, tuple) else None)


def _outer_moments(T, target, noise, center, rule_freq_bound, h, spec):
    """E T(X), E T(X)**2 for X ~ g by composite Gauss-Legendre in the observation."""
    R = target.tail_radius() + noise.tail_radius()
    lo, hi = target.mean() - R, target.mean() + R
    if max(abs(lo - center), abs(hi - center)) / h > rule_freq_bound:
        raise ValueError("rule frequency bound does not cover the outer range")
    prev, err = None, math.inf
    for level in range(spec.max_refinements + 1):
        u, w = composite_rule(np.linspace(lo, hi, 9), spec.node_count * 2**level, 1.0 / h)
        g = convolved_density(target, noise, u, spec) * w
        t = T(u)
        m1, m2 = float(np.sum(g * t)), float(np.sum(g * t * t))
        var = m2 - m1 * m1
        if prev is not None:
            err = abs(var - prev)
            if err <= max(spec.abs_tol, spec.rel_tol * abs(var)):
                return m1, m2, var, err
        prev = var
    raise ConvergenceError("outer variance quadrature stalled", error_bound=err)


def exact_term_variance(
    f: TargetModel, m: NoiseModel, k: KernelSpec, h: float, x: float, spec: QuadratureSpec = DEFAULT_SPEC
) -> ScaledValue:
    """Var T_1 with T_1 = 1/(pi h) int_0^1 cos(s (X_1 - x)/h) phi_w(s) / phi_k(s/h) ds.

    So that Var f_nh(x) = Var(T_1) / n exactly.  Heavy-tailed noise is
    truncated at ``NoiseModel.tail_radius``.
    """
    R = f.tail_radius() + m.tail_radius() + abs(f.mean() - x)
    if m.family == "cauchy" and m.params[0] == 1.0 and k.name == "indicator":
        # closed-form term, in units of e^{1/h} / (pi h) like the rule below
        def T(u):
            d = u - x
            return h * (np.cos(d / h) + d * np.sin(d / h) - math.exp(-1.0 / h)) / (1.0 + d * d)

        _, _, var, _ = _outer_moments(T, f, m, x, R / h, h, spec)
        return scaled_normalize(ScaledValue(var / (math.pi * h) ** 2, 2.0 / h))
    rule = term_rule(k, m, h, R / h, spec)
    _, _, var, _ = _outer_moments(lambda u: rule.cos((u - x) / h), f, m, x, R / h, h, spec)
    return scaled_normalize(ScaledValue(var / (math.pi * h) ** 2, 2.0 * rule.log_scale))


def exact_interval_variance(
    f: TargetModel, m: NoiseModel, k: KernelSpec, h: float, a: float, b: float, spec: QuadratureSpec = DEFAULT_SPEC
) -> ScaledValue:
    """Var T_1 for the interval estimator, Var F_nh(a, b) = Var(T_1) / n."""
    _check_interval(a, b, h)
    mid, c = 0.5 * (a + b), (b - a) / (2.0 * h)
    R = f.tail_radius() + m.tail_radius() + abs(f.mean() - mid)
    rule = term_rule(k, m, h, R / h, spec, half_width=c)
    _, _, var, _ = _outer_moments(lambda u: rule.cos((u - mid) / h), f, m, mid, R / h, h, spec)
    return scaled_normalize(ScaledValue(var * (2.0 / math.pi) ** 2, 2.0 * rule.log_scale))
