"""Overflow-safe scaled arithmetic and composite Gauss-Legendre quadrature.

Deconvolution integrands carry factors such as exp(s**2 / (2 h**2)) that
overflow doubles long before h gets interesting.  Everything here keeps a
separate natural-log exponent next to a mantissa of order one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

E = math.e

__all__ = [
    "ConvergenceError",
    "InvalidValueError",
    "QuadratureSpec",
    "ScaledValue",
    "TrigRule",
    "composite_rule",
    "integrate_scaled",
    "panel_edges",
    "scaled_add",
    "scaled_mul",
    "scaled_normalize",
]


class InvalidValueError(ValueError):
    """Raised for non-finite mantissas or exponents."""


class ConvergenceError(RuntimeError):
    """Quadrature did not reach tolerance within the refinement budget."""

    def __init__(self, message, estimate=None, error_bound=float("nan")):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class ScaledValue:
    """The real number ``mantissa * exp(log_scale)``."""

    mantissa: float
    log_scale: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.mantissa):
            raise InvalidValueError(f"non-finite mantissa {self.mantissa!r}")
        if not math.isfinite(self.log_scale):
            raise InvalidValueError(f"non-finite log_scale {self.log_scale!r}")

    @classmethod
    def from_float(cls, x: float) -> "ScaledValue":
        return scaled_normalize(cls(float(x), 0.0))

    @classmethod
    def exp(cls, x: float) -> "ScaledValue":
        """exp(x) without evaluating it."""
        return cls(1.0, float(x))

    def to_float(self) -> float:
        """Plain float; may be inf or 0 when out of double range."""
        if self.mantissa == 0.0:
            return 0.0
        try:
            return self.mantissa * math.exp(self.log_scale)
        except OverflowError:
            return math.copysign(math.inf, self.mantissa)

    def log_abs(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.log_scale

    def is_zero(self) -> bool:
        return self.mantissa == 0.0

    def __neg__(self):
        return ScaledValue(-self.mantissa, self.log_scale)

    def __add__(self, other):
        return scaled_add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return scaled_add(self, -_coerce(other))

    def __rsub__(self, other):
        return scaled_add(_coerce(other), -self)

    def __mul__(self, other):
        return scaled_mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other.mantissa == 0.0:
            raise ZeroDivisionError("division by a zero ScaledValue")
        return scaled_normalize(
            ScaledValue(self.mantissa / other.mantissa, self.log_scale - other.log_scale)
        )

    def __float__(self):
        return self.to_float()


def _coerce(x) -> ScaledValue:
    if isinstance(x, ScaledValue):
        return x
    return ScaledValue.from_float(float(x))


def scaled_normalize(v: ScaledValue) -> ScaledValue:
    """Canonical form: mantissa 0 with log_scale 0, or |mantissa| in [1, e) and integral log_scale.

    Keeping log_scale integral makes exponent arithmetic exact in later
    products and sums; the fractional part is folded into the mantissa once.
    """
    m = v.mantissa
    if not math.isfinite(m):
        raise InvalidValueError(f"non-finite mantissa {m!r}")
    if m == 0.0:
        return ScaledValue(0.0, 0.0)
    k = math.floor(math.log(abs(m)))
    if k != 0:
        m = m * math.exp(-k)
    whole = math.floor(v.log_scale)
    frac = v.log_scale - whole
    if frac:
        m = m * math.exp(frac)
    ls = whole + k
    # log() rounding can leave the mantissa a hair outside [1, e)
    while abs(m) >= E:
        m /= E
        ls += 1
    while abs(m) < 1.0:
        m *= E
        ls -= 1
    return ScaledValue(m, ls)


def scaled_mul(a: ScaledValue, b: ScaledValue) -> ScaledValue:
    return scaled_normalize(ScaledValue(a.mantissa * b.mantissa, a.log_scale + b.log_scale))


def scaled_add(a: ScaledValue, b: ScaledValue) -> ScaledValue:
    if a.mantissa == 0.0:
        return scaled_normalize(b)
    if b.mantissa == 0.0:
        return scaled_normalize(a)
    top = max(a.log_scale, b.log_scale)
    m = a.mantissa * math.exp(a.log_scale - top) + b.mantissa * math.exp(b.log_scale - top)
    return scaled_normalize(ScaledValue(m, top))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre settings.

    ``node_count`` is the per-panel base order; panels that must resolve
    oscillation get proportionally more.  Tolerances apply to mantissas,
    i.e. after the largest exponential factor has been pulled out.
    """

    node_count: int = 16
    panel_strategy: str = "geometric"
    abs_tol: float = 1e-12
    rel_tol: float = 1e-9
    max_refinements: int = 5

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError("node_count must be >= 2")
        if self.panel_strategy not in ("uniform", "geometric"):
            raise ValueError(f"unknown panel_strategy {self.panel_strategy!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")


DEFAULT_SPEC = QuadratureSpec()


@lru_cache(maxsize=256)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_edges(lo, hi, strategy="geometric", peak=None, scale=None, panels=1):
    """Panel breakpoints on [lo, hi].

    With the geometric strategy, panels halve in width toward ``peak``
    ('lo', 'hi' or 'both') until they reach ``scale``.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    length = hi - lo
    if strategy == "uniform" or peak is None or scale is None or scale >= length:
        return np.linspace(lo, hi, max(1, int(panels)) + 1)
    if peak == "both":
        mid = 0.5 * (lo + hi)
        left = panel_edges(lo, mid, strategy, "lo", scale, panels)
        right = panel_edges(mid, hi, strategy, "hi", scale, panels)
        return np.concatenate([left, right[1:]])
    offsets = [0.0]
    d = scale
    while d < length:
        offsets.append(d)
        d *= 2.0
    offsets.append(length)
    offsets = np.asarray(offsets)
    if peak == "hi":
        return (hi - offsets)[::-1]
    if peak == "lo":
        return lo + offsets
    raise ValueError(f"unknown peak {peak!r}")


def composite_rule(edges, node_count, frequency=0.0):
    """Nodes and weights of a composite Gauss-Legendre rule.

    Each panel gets ``node_count * max(1, frequency * width / pi)`` nodes,
    laid out as equal sub-panels of ``node_count`` nodes each (high-order
    Legendre rules are expensive to generate).
    """
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(int(node_count))
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        k = int(math.ceil(max(1.0, frequency * (b - a) / math.pi)))
        sub = np.linspace(a, b, k + 1)
        half = 0.5 * np.diff(sub)[:, None]
        mid = 0.5 * (sub[:-1] + sub[1:])[:, None]
        nodes.append((half * x + mid).ravel())
        weights.append((half * w).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _rule(lo, hi, spec, level, peak, scale, frequency, panels):
    edges = panel_edges(lo, hi, spec.panel_strategy, peak, scale, panels * (2 ** level if spec.panel_strategy == "uniform" else 1))
    return composite_rule(edges, spec.node_count * 2 ** level, frequency)


def integrate_scaled(
    f: Callable[[np.ndarray], tuple],
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    *,
    peak=None,
    scale=None,
    frequency: float = 0.0,
    panels: int = 1,
    full_output: bool = False,
):
    """Integrate ``amplitude(s) * exp(log_weight(s))`` over [lo, hi].

    ``f`` maps an array of nodes to ``(amplitude, log_weight)``.  The largest
    log weight seen on the nodes is factored out before summing, so the
    result is returned as a :class:`ScaledValue`.  The order is doubled until
    successive estimates agree to ``max(abs_tol, rel_tol * |I|)`` in mantissa
    units.  With ``full_output`` the absolute error estimate (in units of
    ``exp(log_scale)`` of the result) is returned as well.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    prev = None
    top = None
    err = math.inf
    for level in range(spec.max_refinements + 1):
        s, w = _rule(lo, hi, spec, level, peak, scale, frequency, panels)
        amp, logw = f(s)
        amp = np.broadcast_to(np.asarray(amp, dtype=float), s.shape)
        logw = np.broadcast_to(np.asarray(logw, dtype=float), s.shape)
        if not np.all(np.isfinite(logw)):
            raise InvalidValueError("log weight is not finite on the integration range")
        if top is None:
            top = float(np.max(logw))
        total = float(np.sum(w * amp * np.exp(logw - top)))
        if prev is not None:
            err = abs(total - prev)
            if err <= max(spec.abs_tol, spec.rel_tol * abs(total)):
                value = scaled_normalize(ScaledValue(total, top))
                return (value, err) if full_output else value
        prev = total
    best = scaled_normalize(ScaledValue(prev, top))
    raise ConvergenceError(
        f"quadrature on [{lo}, {hi}] stalled at error {err:.3g}", estimate=best, error_bound=err
    )


class TrigRule:
    """A validated quadrature rule for a family of trigonometric integrals.

    Represents ``I(w) = int amp(s) cos(w s) exp(logw(s)) ds`` (and the sine
    analogue) for every frequency ``w`` in ``[0, max_freq]`` by one set of
    effective weights, so evaluating thousands of frequencies is a single
    matrix product.  Values are mantissas relative to ``exp(log_scale)``.
    """

    def __init__(self, nodes, weights, log_scale, error, l1_norm):
        self.nodes = nodes
        self.weights = weights
        self.log_scale = log_scale
        self.error = error
        self.l1_norm = l1_norm

    @classmethod
    def build(
        cls,
        f,
        lo,
        hi,
        max_freq,
        spec: QuadratureSpec = DEFAULT_SPEC,
        *,
        peak=None,
        scale=None,
        panels=1,
        extra_freq=0.0,
        probes=33,
        prune=True,
    ):
        """Refine until every probe frequency in [0, max_freq] has converged.

        ``extra_freq`` is oscillation already inside ``amp`` and only affects
        the node budget.  The tolerance is relative to the L1 norm of the
        effective weights, which bounds ``|I(w)|`` for every ``w``.
        """
        max_freq = float(abs(max_freq))
        omegas = np.linspace(0.0, max_freq, probes) if max_freq > 0 else np.zeros(1)
        node_freq = max_freq + abs(extra_freq)
        prev = None
        top = None
        err = math.inf
        for level in range(spec.max_refinements + 1):
            s, w = _rule(lo, hi, spec, level, peak, scale, node_freq, panels)
            amp, logw = f(s)
            amp = np.broadcast_to(np.asarray(amp, dtype=float), s.shape)
            logw = np.broadcast_to(np.asarray(logw, dtype=float), s.shape)
            if not np.all(np.isfinite(logw)):
                raise InvalidValueError("log weight is not finite on the integration range")
            if top is None:
                top = float(np.max(logw))
            W = w * amp * np.exp(logw - top)
            arg = np.outer(omegas, s)
            vals = np.concatenate([np.cos(arg) @ W, np.sin(arg) @ W])
            l1 = float(np.sum(np.abs(W)))
            if prev is not None:
                err = float(np.max(np.abs(vals - prev)))
                if err <= max(spec.abs_tol, spec.rel_tol * l1):
                    break
            prev = vals
        else:
            raise ConvergenceError(
                f"trig rule on [{lo}, {hi}] up to frequency {max_freq:.4g} stalled at {err:.3g}",
                error_bound=err,
            )
        dropped = 0.0
        if prune:
            order = np.argsort(np.abs(W))
            cum = np.cumsum(np.abs(W[order]))
            budget = 0.01 * max(spec.abs_tol, spec.rel_tol * l1)
            cut = int(np.searchsorted(cum, budget, side="right"))
            if cut > 0:
                dropped = float(cum[cut - 1])
                keep = np.sort(order[cut:])
                s, W = s[keep], W[keep]
        return cls(np.ascontiguousarray(s), np.ascontiguousarray(W), top, err + dropped, l1)

    def cos(self, freqs) -> np.ndarray:
        return self._apply(np.cos, freqs)

    def sin(self, freqs) -> np.ndarray:
        return self._apply(np.sin, freqs)

    def _apply(self, fn, freqs, budget=4_000_000):
        freqs = np.asarray(freqs, dtype=float)
        flat = freqs.ravel()
        chunk = max(1, budget // max(1, self.nodes.size))
        out = np.empty(flat.shape)
        for i in range(0, flat.size, chunk):
            out[i : i + chunk] = fn(np.multiply.outer(flat[i : i + chunk], self.nodes)) @ self.weights
        return out.reshape(freqs.shape)

    def __len__(self):
        return self.nodes.size
