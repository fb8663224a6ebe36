"""Error (noise) and signal (target) distributions.

Noise laws are symmetric with a strictly positive characteristic function
of the exact form C |t|^lambda0 exp(-|t|^lambda / mu), so the reciprocal
1/phi_k used by the estimators is always carried as a log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .numerics import DEFAULT_SPEC, QuadratureSpec, TrigRule

__all__ = [
    "ConditionK",
    "NoiseModel",
    "TargetModel",
    "convolved_density",
    "make_rng",
    "parse_noise",
    "parse_target",
    "phi_k_eval",
    "sample_noise",
]

# exp(-LOG_CUTOFF) is treated as zero when truncating Fourier integrals
LOG_CUTOFF = 45.0
TAIL_TERMS = 8
GH_NODES = 96


def make_rng(seed) -> np.random.Generator:
    """Philox-backed generator; passes an existing Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class ConditionK:
    """Constants of phi_k(t) ~ C |t|^lambda0 exp(-|t|^lam / mu)."""

    C: float
    lambda0: float
    lam: float
    mu: float

    def __post_init__(self):
        if isinstance(self.C, complex) or not self.C > 0:
            raise ValueError("C must be a positive real constant")
        if not self.lam > 0 or not self.mu > 0:
            raise ValueError("lam and mu must be positive")


@dataclass(frozen=True)
class NoiseModel:
    """Symmetric noise law: ``normal`` (sigma), ``stable`` (lam, c), ``cauchy`` (c).

    ``none`` is the degenerate zero-noise law (phi_k = 1), only meant for
    checking that the estimators reduce to ordinary kernel estimates.
    """

    family: str
    params: tuple = ()

    def __post_init__(self):
        fam, p = self.family, self.params
        if fam == "normal":
            (sigma,) = p
            if not sigma > 0:
                raise ValueError("normal noise needs sigma > 0")
        elif fam == "stable":
            lam, c = p
            if not (1.0 < lam <= 2.0):
                raise ValueError("stable noise needs 1 < lam <= 2 (use cauchy for lam = 1)")
            if not c > 0:
                raise ValueError("stable noise needs scale c > 0")
        elif fam == "cauchy":
            (c,) = p
            if not c > 0:
                raise ValueError("cauchy noise needs scale c > 0")
        elif fam == "none":
            if p:
                raise ValueError("degenerate noise takes no parameters")
        else:
            raise ValueError(f"unknown noise family {fam!r}")

    @classmethod
    def normal(cls, sigma=1.0):
        return cls("normal", (float(sigma),))

    @classmethod
    def stable(cls, lam, c=1.0):
        return cls("stable", (float(lam), float(c)))

    @classmethod
    def cauchy(cls, c=1.0):
        return cls("cauchy", (float(c),))

    @classmethod
    def degenerate(cls):
        return cls("none", ())

    @property
    def condition_k(self) -> ConditionK | None:
        fam, p = self.family, self.params
        if fam == "normal":
            return ConditionK(1.0, 0.0, 2.0, 2.0 / p[0] ** 2)
        if fam == "stable":
            lam, c = p
            return ConditionK(1.0, 0.0, lam, c ** (-lam))
        if fam == "cauchy":
            return ConditionK(1.0, 0.0, 1.0, 1.0 / p[0])
        return None

    def log_phi(self, t):
        """log phi_k(t)."""
        t = np.abs(np.asarray(t, dtype=float))
        fam, p = self.family, self.params
        if fam == "normal":
            out = -0.5 * (p[0] * t) ** 2
        elif fam == "stable":
            out = -((p[1] * t) ** p[0])
        elif fam == "cauchy":
            out = -p[0] * t
        else:
            out = np.zeros_like(t)
        return float(out) if out.ndim == 0 else out

    def phi(self, t):
        return np.exp(self.log_phi(t))

    def log_phi_slope(self, t: float) -> float:
        """d/dt of -log phi_k at t > 0."""
        fam, p = self.family, self.params
        if fam == "normal":
            return p[0] ** 2 * t
        if fam == "stable":
            lam, c = p
            return lam * c**lam * t ** (lam - 1.0)
        if fam == "cauchy":
            return p[0]
        return 0.0

    def cutoff(self) -> float:
        """Frequency beyond which phi_k < exp(-LOG_CUTOFF)."""
        fam, p = self.family, self.params
        if fam == "normal":
            return math.sqrt(2 * LOG_CUTOFF) / p[0]
        if fam == "stable":
            return LOG_CUTOFF ** (1.0 / p[0]) / p[1]
        if fam == "cauchy":
            return LOG_CUTOFF / p[0]
        return math.inf

    def sample(self, n, seed=None):
        rng = make_rng(seed)
        fam, p = self.family, self.params
        if fam == "normal":
            return p[0] * rng.standard_normal(n)
        if fam == "cauchy":
            return p[0] * np.tan(math.pi * (rng.random(n) - 0.5))
        if fam == "stable":
            return _stable_cms(p[0], p[1], n, rng)
        return np.zeros(n)

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        fam, p = self.family, self.params
        if fam == "normal":
            out = np.exp(-0.5 * (u / p[0]) ** 2) / (p[0] * math.sqrt(2 * math.pi))
        elif fam == "cauchy":
            out = p[0] / (math.pi * (p[0] ** 2 + u * u))
        elif fam == "stable":
            out = _stable_table(p[0], p[1]).pdf(u)
        else:
            raise ValueError("degenerate noise has no density")
        return float(out) if out.ndim == 0 else out

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        fam, p = self.family, self.params
        if fam == "normal":
            out = special.ndtr(u / p[0])
        elif fam == "cauchy":
            out = 0.5 + np.arctan(u / p[0]) / math.pi
        elif fam == "stable":
            out = _stable_table(p[0], p[1]).cdf(u)
        else:
            out = (u >= 0).astype(float)
        return float(out) if out.ndim == 0 else out

    def tail_radius(self, tail=1e-12, cap=2000.0) -> float:
        """r with P(|Z| > r) <~ tail, capped for heavy tails."""
        fam, p = self.family, self.params
        if fam == "normal":
            return p[0] * float(special.ndtri(1 - tail / 2))
        if fam == "cauchy":
            return min(cap, p[0] * math.tan(math.pi / 2 * (1 - tail)))
        if fam == "stable":
            lam, c = p
            # P(|Z| > r) ~ (2/pi) Gamma(lam) sin(pi lam / 2) (c / r)^lam
            k = 2 / math.pi * math.gamma(lam) * math.sin(math.pi * lam / 2)
            return min(cap, max(10 * c, c * (k / tail) ** (1 / lam)))
        return 0.0

    def label(self) -> str:
        return f"{self.family}:{','.join(format(v, 'g') for v in self.params)}" if self.params else self.family


def phi_k_eval(m: NoiseModel, t, log=False):
    """phi_k(t), or log phi_k(t) with ``log=True`` (no underflow)."""
    return m.log_phi(t) if log else m.phi(t)


def sample_noise(m: NoiseModel, n: int, seed) -> np.ndarray:
    return m.sample(n, seed)


def _stable_cms(lam, c, n, rng):
    # Chambers-Mallows-Stuck, symmetric case
    v = math.pi * (rng.random(n) - 0.5)
    w = rng.standard_exponential(n)
    x = np.sin(lam * v) / np.cos(v) ** (1.0 / lam) * (np.cos((1.0 - lam) * v) / w) ** ((1.0 - lam) / lam)
    return c * x


class _StableTable:
    """pdf/cdf of a symmetric stable law by Fourier inversion.

    Both are tabulated on [0, R] with step 1e-3 and interpolated with a cubic
    spline; the cdf is the spline's antiderivative.  Outside the table the
    inversion integrals are evaluated directly.
    """

    STEP = 1e-3

    def __init__(self, lam, c, spec=DEFAULT_SPEC):
        self.lam, self.c, self.spec = lam, c, spec
        self.tmax = LOG_CUTOFF ** (1.0 / lam) / c
        self.R = 30.0 * c
        x = np.arange(0.0, self.R + self.STEP / 2, self.STEP)
        dens = self._pdf_direct(x)
        self.spline = CubicSpline(x, dens)
        self.anti = self.spline.antiderivative()

    def _logphi(self, t):
        return -((self.c * t) ** self.lam)

    def _pdf_direct(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        rule = TrigRule.build(
            lambda t: (1.0, self._logphi(t)), 0.0, self.tmax, float(np.max(x, initial=0.0)), self.spec
        )
        return rule.cos(x) * math.exp(rule.log_scale) / math.pi

    def _tail_terms(self, a, pdf):
        # asymptotic series in (c/x)^lam; at x >= 30c eight terms reach double precision
        lam, c = self.lam, self.c
        out = np.zeros(a.shape)
        for k in range(1, TAIL_TERMS + 1):
            g = math.gamma(k * lam + 1) if pdf else math.gamma(k * lam)
            coef = (-1) ** (k + 1) * g / math.factorial(k) * math.sin(k * math.pi * lam / 2) * c ** (k * lam)
            out += coef * a ** (-k * lam - (1 if pdf else 0))
        return out / math.pi

    def pdf(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        out = np.empty(a.shape)
        inside = a <= self.R
        out[inside] = self.spline(a[inside])
        if np.any(~inside):
            out[~inside] = self._tail_terms(a[~inside], True)
        return out

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        upper = np.empty(a.shape)
        inside = a <= self.R
        upper[inside] = 0.5 + self.anti(a[inside])
        if np.any(~inside):
            upper[~inside] = 1.0 - self._tail_terms(a[~inside], False)
        return np.where(u >= 0, upper, 1.0 - upper)


@lru_cache(maxsize=8)
def _stable_table(lam, c):
    return _StableTable(lam, c)


@dataclass(frozen=True)
class TargetModel:
    """Law of the unobserved signal Y: ``normal`` (m, s), ``mix`` (w, m, s triples), ``uniform`` (lo, hi)."""

    family: str
    params: tuple = ()
    _arrays: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        fam, p = self.family, self.params
        if fam == "normal":
            m, s = p
            if not s > 0:
                raise ValueError("normal target needs sd > 0")
        elif fam == "mix":
            if len(p) == 0 or len(p) % 3:
                raise ValueError("mixture needs (weight, mean, sd) triples")
            w = np.asarray(p[0::3], dtype=float)
            if np.any(w <= 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
                raise ValueError("mixture weights must be positive and sum to 1")
            if np.any(np.asarray(p[2::3]) <= 0):
                raise ValueError("mixture sds must be positive")
            object.__setattr__(
                self, "_arrays", (w, np.asarray(p[1::3], dtype=float), np.asarray(p[2::3], dtype=float))
            )
        elif fam == "uniform":
            lo, hi = p
            if not lo < hi:
                raise ValueError("uniform target needs lo < hi")
        else:
            raise ValueError(f"unknown target family {fam!r}")

    @classmethod
    def normal(cls, mean=0.0, sd=1.0):
        return cls("normal", (float(mean), float(sd)))

    @classmethod
    def mixture(cls, weights, means, sds):
        p = []
        for w, m, s in zip(weights, means, sds):
            p += [float(w), float(m), float(s)]
        return cls("mix", tuple(p))

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0):
        return cls("uniform", (float(lo), float(hi)))

    def _components(self):
        if self.family == "normal":
            return np.array([1.0]), np.array([self.params[0]]), np.array([self.params[1]])
        return self._arrays

    def density(self, y):
        y = np.asarray(y, dtype=float)
        if self.family == "uniform":
            lo, hi = self.params
            out = np.where((y >= lo) & (y <= hi), 1.0 / (hi - lo), 0.0)
        else:
            w, m, s = self._components()
            z = (y[..., None] - m) / s
            out = np.sum(w * np.exp(-0.5 * z * z) / (s * math.sqrt(2 * math.pi)), axis=-1)
        return float(out) if out.ndim == 0 else out

    pdf = density

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        if self.family == "uniform":
            lo, hi = self.params
            out = np.clip((y - lo) / (hi - lo), 0.0, 1.0)
        else:
            w, m, s = self._components()
            out = np.sum(w * special.ndtr((y[..., None] - m) / s), axis=-1)
        return float(out) if out.ndim == 0 else out

    def char_fn(self, t):
        """E exp(i t Y), complex."""
        t = np.asarray(t, dtype=float)
        if self.family == "uniform":
            lo, hi = self.params
            half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
            out = np.sinc(t * half / math.pi) * np.exp(1j * t * mid)
        else:
            w, m, s = self._components()
            tt = t[..., None]
            out = np.sum(w * np.exp(1j * tt * m - 0.5 * (s * tt) ** 2), axis=-1)
        return complex(out) if out.ndim == 0 else out

    def sample(self, n, seed=None):
        rng = make_rng(seed)
        if self.family == "uniform":
            lo, hi = self.params
            return lo + (hi - lo) * rng.random(n)
        w, m, s = self._components()
        if w.size == 1:
            return m[0] + s[0] * rng.standard_normal(n)
        idx = rng.choice(w.size, size=n, p=w)
        return m[idx] + s[idx] * rng.standard_normal(n)

    def mean(self) -> float:
        if self.family == "uniform":
            return 0.5 * sum(self.params)
        w, m, _ = self._components()
        return float(np.sum(w * m))

    def second_moment(self) -> float:
        if self.family == "uniform":
            lo, hi = self.params
            return (lo * lo + lo * hi + hi * hi) / 3.0
        w, m, s = self._components()
        return float(np.sum(w * (m * m + s * s)))

    def tail_radius(self, tail=1e-12) -> float:
        """r with P(|Y - mean| > r) <= tail."""
        if self.family == "uniform":
            lo, hi = self.params
            return 0.5 * (hi - lo)
        w, m, s = self._components()
        z = float(special.ndtri(1 - tail / 2))
        return float(np.max(np.abs(m - self.mean()) + z * s))

    def label(self) -> str:
        return f"{self.family}:{','.join(format(v, 'g') for v in self.params)}"


def _real_space_convolution(f: TargetModel, m: NoiseModel, u):
    """int f(y) k(u - y) dy with Gauss-Hermite (normal parts) or Gauss-Legendre (uniform) in y."""
    if f.family == "uniform":
        lo, hi = f.params
        x, w = np.polynomial.legendre.leggauss(GH_NODES)
        y = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        return 0.5 * np.sum(w * m.pdf(u[..., None] - y), axis=-1)
    x, w = special.roots_hermite(GH_NODES)
    wts, mu, s = f._components()
    out = 0.0
    for wi, mi, si in zip(wts, mu, s):
        y = mi + math.sqrt(2.0) * si * x
        out = out + wi * np.sum(w * m.pdf(u[..., None] - y), axis=-1) / math.sqrt(math.pi)
    return out


def convolved_density(f: TargetModel, m: NoiseModel, u, spec: QuadratureSpec = DEFAULT_SPEC, fourier: bool = False):
    """Density g = f * k of X = Y + Z, vectorized over ``u``.

    Closed forms for normal and Cauchy noise; stable noise by quadrature of
    f(y) k(u - y) over y.  ``fourier=True`` forces the inversion
    g(u) = (1/pi) int_0^inf Re[exp(-itu) phi_f(t)] phi_k(t) dt instead.
    """
    u = np.asarray(u, dtype=float)
    if m.family == "none":
        out = np.asarray(f.density(u))
    elif m.family == "normal":
        sig = m.params[0]
        if f.family == "uniform":
            lo, hi = f.params
            out = (special.ndtr((u - lo) / sig) - special.ndtr((u - hi) / sig)) / (hi - lo)
        else:
            w, mu, s = f._components()
            tot = np.sqrt(s * s + sig * sig)
            z = (u[..., None] - mu) / tot
            out = np.sum(w * np.exp(-0.5 * z * z) / (tot * math.sqrt(2 * math.pi)), axis=-1)
    elif m.family == "cauchy" and f.family != "uniform":
        w, mu, s = f._components()
        out = np.sum(w * special.voigt_profile(u[..., None] - mu, s, m.params[0]), axis=-1)
    elif m.family == "cauchy":
        lo, hi = f.params
        c = m.params[0]
        out = (np.arctan((u - lo) / c) - np.arctan((u - hi) / c)) / (math.pi * (hi - lo))
    elif m.family == "stable" and not fourier:
        out = _real_space_convolution(f, m, u)
    else:
        tmax = m.cutoff()
        umax = float(np.max(np.abs(u), initial=0.0))
        re = TrigRule.build(lambda t: (f.char_fn(t).real, m.log_phi(t)), 0.0, tmax, umax, spec)
        out = re.cos(u) * math.exp(re.log_scale)
        probe = np.linspace(0.0, min(tmax, 50.0), 257)
        if np.max(np.abs(np.imag(f.char_fn(probe)))) > 0:
            im = TrigRule.build(lambda t: (f.char_fn(t).imag, m.log_phi(t)), 0.0, tmax, umax, spec)
            out = out + im.sin(u) * math.exp(im.log_scale)
        out = out / math.pi
    return float(out) if np.ndim(out) == 0 else out


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def parse_noise(text: str) -> NoiseModel:
    """``normal:s``, ``stable:lam,c``, ``cauchy:c`` or ``none``."""
    name, _, rest = text.strip().partition(":")
    vals = _floats(rest)
    if name == "normal":
        return NoiseModel.normal(*(vals or (1.0,)))
    if name == "stable":
        return NoiseModel.stable(*vals)
    if name == "cauchy":
        return NoiseModel.cauchy(*(vals or (1.0,)))
    if name == "none":
        return NoiseModel.degenerate()
    raise ValueError(f"cannot parse noise spec {text!r}")


def parse_target(text: str) -> TargetModel:
    """``normal:m,s``, ``mix:w1,m1,s1,...`` or ``uniform:lo,hi``."""
    name, _, rest = text.strip().partition(":")
    vals = _floats(rest)
    if name == "normal":
        return TargetModel.normal(*(vals or (0.0, 1.0)))
    if name == "mix":
        return TargetModel("mix", vals)
    if name == "uniform":
        return TargetModel.uniform(*(vals or (0.0, 1.0)))
    raise ValueError(f"cannot parse target spec {text!r}")
