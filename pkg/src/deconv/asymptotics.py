"""Limit laws, Condition A/A* classification and Laplace-type expansions.

Notation: u = 1/(2h), the lattice is S = {pi k / width : k >= 1} with
width = b - a, and u- <= u <= u+ are the nearest lattice points.  The
distances are measured by q- = u**(lam-1) (u - u-) and
q+ = u**(lam-1) (u+ - u).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .distributions import NoiseModel, TargetModel, convolved_density
from .kernels import KernelSpec, phi_w_eval
from .numerics import DEFAULT_SPEC, QuadratureSpec, ScaledValue, integrate_scaled, scaled_normalize

__all__ = [
    "THEOREMS",
    "BandwidthSchedule",
    "ConditionA",
    "ConditionAClass",
    "DomainError",
    "LimitLaw",
    "cauchy_sigma2",
    "classify_condition_a",
    "default_probes",
    "lattice_neighbors",
    "laplace_asymptotic",
    "laplace_exact",
    "limit_law",
    "make_schedule",
    "tau_n_eval",
]

THEOREMS = ("T1", "T2a", "T2b", "T2c", "T3", "T4", "T5a", "T5b", "T5c", "T6", "T7")


class DomainError(ValueError):
    """Theorem preconditions are not met."""


class ConditionA(str, enum.Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    UNCLASSIFIED = "Unclassified"


# ---------------------------------------------------------------------------
# Lattice and schedules
# ---------------------------------------------------------------------------


def lattice_neighbors(u: float, width: float):
    """(u-, u+) in S = {pi k / width}; both equal u when u is on the lattice.

    Points within a few ulps of a lattice point count as on it.  Below the
    first lattice point u- is 0.
    """
    if not (u > 0 and width > 0):
        raise ValueError("need u > 0 and width > 0")
    step = math.pi / width
    r = u / step
    k = round(r)
    if abs(r - k) <= 8 * np.finfo(float).eps * max(1.0, r):
        return k * step, k * step
    lo = math.floor(r)
    return lo * step, (lo + 1) * step


def _q_pair(u, width, lam):
    lo, hi = lattice_neighbors(u, width)
    f = u ** (lam - 1.0)
    return lo, hi, f * (u - lo), f * (hi - u)


def _sqrt_log(n):
    return math.sqrt(math.log(n))


@dataclass(frozen=True)
class BandwidthSchedule:
    """A rule n -> h_n, with optional interval width and lattice bookkeeping.

    ``cell(n)`` returns the lattice index k of the lattice point the
    construction attached u_n to; its parity separates the subsequences
    along which cos((b - a)/(2h)) keeps one sign.
    """

    rule: Callable[[int], float]
    interval_width: Optional[float] = None
    description: str = ""
    target: Optional[str] = None
    lam: float = 2.0
    gamma: Optional[float] = None
    side: Optional[str] = None
    cell: Optional[Callable[[int], int]] = None

    def __call__(self, n) -> float:
        return self.rule(n)

    def u(self, n) -> float:
        return 0.5 / self.rule(n)

    def parity(self, n) -> Optional[str]:
        if self.cell is None:
            return None
        return "even" if self.cell(n) % 2 == 0 else "odd"

    def index_for_cell(self, k: int) -> int:
        """Smallest index n (searched on a log grid) whose lattice cell is >= k."""
        if self.cell is None:
            raise ValueError("schedule has no lattice cells")
        lo, hi = 0.7, 1.0
        while self.cell(_int_exp(hi)) < k:
            lo, hi = hi, 2.0 * hi
            if hi > 1e7:
                raise ValueError(f"cell {k} not reached")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cell(_int_exp(mid)) >= k:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-9 * hi:
                break
        return _int_exp(hi)

    def points(self, cells):
        """[(n, h, k, parity)] for the first index of each lattice cell."""
        out = []
        for k in cells:
            n = self.index_for_cell(k)
            out.append((n, self.rule(n), self.cell(n), self.parity(n)))
        return out


def _int_exp(v: float) -> int:
    """ceil(e**v) as an exact Python int, also beyond float range."""
    if v < 700:
        return max(2, math.ceil(math.exp(v)))
    m, e = math.modf(v / math.log(2.0))
    return max(2, math.ceil(2.0**m * 2**52)) << max(0, int(e) - 52)


def make_schedule(
    target,
    width: float,
    lam: float = 2.0,
    base: Optional[Callable[[int], float]] = None,
    gamma: Optional[float] = None,
    side: str = "plus",
) -> BandwidthSchedule:
    """Construct h_n = 1/(2 u_n) meeting Condition A1, A2 or A3 (A* for lam != 2).

    ``base(n)`` increases to infinity (default sqrt(log n)); its lattice
    cell k_n = floor(base(n) width / pi) fixes the lattice point
    L = pi k_n / width.  Then u_n is L (A2), L plus half a gap (A1), or the
    point at lattice distance gamma / u**(lam-1) on the chosen side
    (A3): ``side='plus'`` puts u below L so that q+ = gamma, ``'minus'``
    puts it above so that q- = gamma.
    """
    target = ConditionA(target)
    if not width > 0:
        raise ValueError("width must be positive")
    if lam < 1:
        raise ValueError("lam must be >= 1")
    base = base or _sqrt_log
    step = math.pi / width
    if target is ConditionA.A3:
        if gamma is None or not gamma > 0:
            raise ValueError("A3 needs gamma > 0")
        if side not in ("plus", "minus"):
            raise ValueError("side must be 'plus' or 'minus'")
        # smallest cell where the gamma offset fits inside half a gap
        kmin = 1
        while (kmin - 0.5) ** (lam - 1.0) * step ** lam * 0.5 <= gamma:
            kmin += 1
    elif target is ConditionA.UNCLASSIFIED:
        raise ValueError("cannot construct an unclassified schedule")
    else:
        kmin = 1

    def cell(n):
        return max(kmin, int(math.floor(base(n) / step)))

    def u_of(n):
        L = cell(n) * step
        if target is ConditionA.A2:
            return L
        if target is ConditionA.A1:
            return L + 0.5 * step
        sgn = -1.0 if side == "plus" else 1.0

        def eq(u):
            return u ** (lam - 1.0) * abs(u - L) - gamma

        other = L + sgn * 0.5 * step
        return optimize.brentq(eq, min(L, other), max(L, other), xtol=1e-15 * L, rtol=1e-15)

    def rule(n):
        return 0.5 / u_of(n)

    desc = {
        ConditionA.A1: "u = lattice + half gap",
        ConditionA.A2: "u on the lattice",
        ConditionA.A3: f"lattice distance gamma/u^(lam-1), gamma={gamma}, side={side}",
    }[target]
    return BandwidthSchedule(
        rule, width, f"{target.value}: {desc} (width={width:g}, lam={lam:g})", target.value, lam,
        gamma if target is ConditionA.A3 else None, side if target is ConditionA.A3 else None, cell,
    )


@dataclass(frozen=True)
class ConditionAClass:
    variant: ConditionA
    gamma: Optional[float] = None
    side: Optional[str] = None
    diagnostics: tuple = field(default=())

    def __post_init__(self):
        if not self.diagnostics:
            raise ValueError("diagnostics must be non-empty")
        if self.variant is ConditionA.A3 and not (self.gamma and self.gamma > 0):
            raise ValueError("A3 carries gamma > 0")

    def to_dict(self):
        return {
            "variant": self.variant.value,
            "gamma": self.gamma,
            "side": self.side,
            "diagnostics": [dict(r) for r in self.diagnostics],
        }


def default_probes(count: int = 8):
    """Indices n = 10**(3 * 3**j): h_n moves like 1/sqrt(log n), so probes must be huge."""
    return [10 ** (3 * 3**j) for j in range(count)]


def classify_condition_a(
    sched: BandwidthSchedule,
    lam: Optional[float] = None,
    probes=None,
    tol: float = 0.05,
    tail: int = 3,
) -> ConditionAClass:
    """Decide A1 / A2 / A3(gamma) from q-, q+ on the last ``tail`` probes.

    A1: both q- and q+ increase and min(q-, q+) > 1/tol at the end.
    A2: min(q-, q+) < tol at the end and non-increasing.
    A3: one of q-, q+ has relative spread < tol at a level > tol; the side
    ('minus' or 'plus') is reported.  Anything else is Unclassified.
    """
    if sched.interval_width is None:
        raise ValueError("schedule has no interval width")
    lam = sched.lam if lam is None else lam
    probes = list(probes) if probes is not None else default_probes()
    if len(probes) < 6 or any(b <= a for a, b in zip(probes, probes[1:])):
        raise ValueError("need at least 6 ascending probes")
    rows = []
    for n in probes:
        h = sched(n)
        u = 0.5 / h
        lo, hi, qm, qp = _q_pair(u, sched.interval_width, lam)
        rows.append({"log10_n": math.log10(n), "h": h, "u": u, "u_minus": lo, "u_plus": hi, "q_minus": qm, "q_plus": qp})
    diag = tuple(rows)
    last = rows[-tail:]
    qm = np.array([r["q_minus"] for r in last])
    qp = np.array([r["q_plus"] for r in last])
    qmin = np.minimum(qm, qp)
    if np.all(np.diff(qm) > 0) and np.all(np.diff(qp) > 0) and qmin[-1] > 1.0 / tol:
        return ConditionAClass(ConditionA.A1, diagnostics=diag)
    if qmin[-1] < tol and np.all(np.diff(qmin) <= 1e-12 * max(1.0, float(np.max(qmin)))):
        return ConditionAClass(ConditionA.A2, diagnostics=diag)
    for side, q in (("minus", qm), ("plus", qp)):
        level = float(np.mean(q))
        if level > tol and (np.max(q) - np.min(q)) < tol * level:
            return ConditionAClass(ConditionA.A3, gamma=float(q[-1]), side=side, diagnostics=diag)
    return ConditionAClass(ConditionA.UNCLASSIFIED, diagnostics=diag)


# ---------------------------------------------------------------------------
# Limit laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LimitLaw:
    """Normalizer and limiting normal law of a standardized estimator.

    ``normalizer(n, h)`` returns the positive factor multiplying
    (estimate - expectation), as a ScaledValue.
    """

    theorem_id: str
    normalizer: Callable[[int, float], ScaledValue]
    limit_mean: float
    limit_variance: float
    h_power: Callable[[float], float] = None
    note: str = ""

    def __post_init__(self):
        if not self.limit_variance >= 0:
            raise ValueError("limit variance must be nonnegative")

    def to_dict(self):
        return {
            "theorem_id": self.theorem_id,
            "limit_mean": self.limit_mean,
            "limit_variance": self.limit_variance,
            "note": self.note,
        }


def _power_normalizer(power: float, lam: float, mu: float, width: Optional[float] = None):
    """n, h -> sqrt(n) / (h**power e^{1/(mu h**lam)} [|sin(width/(2h))|])."""

    def norm(n, h):
        log = 0.5 * math.log(n) - power * math.log(h) - 1.0 / (mu * h**lam)
        if width is not None:
            c = width / (2.0 * h)
            s = abs(math.sin(c))
            # a lattice point up to the rounding of c
            if s <= 4.0 * np.finfo(float).eps * max(1.0, c):
                raise ZeroDivisionError("sin((b - a)/(2h)) vanishes; the A1 normalizer is undefined")
            log -= math.log(s)
        return scaled_normalize(ScaledValue(1.0, log))

    return norm


def cauchy_sigma2(f: TargetModel, x: float = 0.0, c: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """(1 / (2 pi^2)) E 1/(1 + (X - x)^2) with X = Y + Z, Z ~ Cauchy(c).

    Quadrature against the convolved density g on a substitution u = x + tan(v)
    that maps the real line to (-pi/2, pi/2); there 1/(1 + (u-x)^2) du = dv.
    """
    m = NoiseModel.cauchy(c)

    def g(v):
        return np.asarray(convolved_density(f, m, x + np.tan(v), spec)), 0.0

    lim = 0.5 * math.pi
    val = integrate_scaled(g, -lim, lim, spec, panels=32)
    return val.to_float() / (2.0 * math.pi**2)


def limit_law(
    theorem_id: str,
    k: KernelSpec,
    m: NoiseModel,
    *,
    x: float = 0.0,
    a: Optional[float] = None,
    b: Optional[float] = None,
    gamma: Optional[float] = None,
    side: str = "plus",
    target: Optional[TargetModel] = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> LimitLaw:
    """Normalizer and limit N(mean, variance) for theorems T1..T7.

    T1-T3 are the normal-noise statements (lam = mu = 2, lam0 = 0); T4-T6
    their Condition-K generalizations.  T2a/T5a use |sin((b-a)/(2h))| so the
    normalizer stays positive.  T2c/T5c depend on the side from which u
    approaches the lattice: ``side='plus'`` (q+ -> gamma) gives the stated
    constant with 4 gamma Gamma(alpha+1) + Gamma(alpha+2); ``'minus'`` flips
    the sign of the second term.  The Condition-K constant C enters as 1/C^2.
    T7 needs ``target`` to evaluate sigma^2 and reports the mean as printed.
    """
    tid = theorem_id.upper().replace("T2A", "T2a").replace("T2B", "T2b").replace("T2C", "T2c")
    tid = tid.replace("T5A", "T5a").replace("T5B", "T5b").replace("T5C", "T5c")
    if tid not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem_id!r}; choose from {THEOREMS}")
    A, al = k.A, k.alpha
    G1, G2 = math.gamma(al + 1.0), math.gamma(al + 2.0)

    if tid == "T7":
        if m.family != "cauchy" or m.params[0] != 1.0 or k.name != "indicator":
            raise DomainError("T7 needs Cauchy(1) noise and the indicator kernel")
        if target is None:
            raise ValueError("T7 needs the target law to evaluate sigma^2")
        s2 = cauchy_sigma2(target, x, 1.0, spec)

        def norm7(n, h):
            return scaled_normalize(ScaledValue(1.0, 0.5 * math.log(n) - 1.0 / h))

        return LimitLaw("T7", norm7, 1.0, s2, lambda h: 0.0, "limit mean 1 as printed; see the open question on T7's centering")

    ck = m.condition_k
    if ck is None:
        raise DomainError("T1-T6 need noise satisfying Condition K")
    if ck.lam <= 1.0:
        raise DomainError("T1-T6 need lam > 1; the arguments fail for lam <= 1")
    normal_ids = ("T1", "T2a", "T2b", "T2c", "T3")
    if tid in normal_ids:
        if not (m.family == "normal" and m.params[0] == 1.0):
            raise DomainError(f"{tid} is stated for Normal(1) noise; use the T4-T6 generalization")
        lam, mu, lam0, C = 2.0, 2.0, 0.0, 1.0
    else:
        lam, mu, lam0, C = ck.lam, ck.mu, ck.lambda0, ck.C
    r = mu / lam
    base = (A**2) / (2.0 * math.pi**2) / C**2
    needs_ab = tid in ("T2a", "T2b", "T2c", "T5a", "T5b", "T5c")
    if needs_ab:
        if a is None or b is None or not a < b:
            raise ValueError(f"{tid} needs an interval a < b")
        width = b - a
    if tid in ("T2c", "T5c"):
        if gamma is None or not gamma > 0:
            raise ValueError(f"{tid} needs gamma > 0")
        if side not in ("plus", "minus"):
            raise ValueError("side must be 'plus' or 'minus'")
    sgn = 1.0 if side == "plus" else -1.0

    if tid in ("T1", "T4"):
        power = lam * (1 + al) + lam0 - 1
        var = base * r ** (2 + 2 * al) * G1**2
        width_sin = None
    elif tid in ("T2a", "T5a"):
        power = (1 + al) * lam + lam0
        var = 4.0 * base * r ** (2 + 2 * al) * G1**2
        width_sin = width
    elif tid in ("T2b", "T5b"):
        power = (2 + al) * lam + lam0 - 1
        var = base * r ** (4 + 2 * al) * G2**2 * width**2
        width_sin = None
    elif tid in ("T2c", "T5c"):
        power = (2 + al) * lam + lam0 - 1
        var = base * (2**lam * gamma * G1 + sgn * r * G2) ** 2 * r ** (2 + 2 * al) * width**2
        width_sin = None
    else:  # T3, T6
        power = (1 + al) * lam + lam0
        var = base * r ** (2 + 2 * al) * G1**2
        width_sin = None
    note = "" if tid not in ("T2c", "T5c") else f"side={side}"
    return LimitLaw(tid, _power_normalizer(power, lam, mu, width_sin), 0.0, var, lambda h, p=power: p, note)


def tau_n_eval(k: KernelSpec, m: NoiseModel, a: float, b: float, h: float) -> float:
    """Leading coefficient of S_nh in F_nh - E F_nh, in units of h^{lam(1+alpha)+lam0} e^{1/(mu h^lam)}.

    (A/pi) [2 (mu/lam)^{1+alpha} Gamma(alpha+1) sin(c)
            - (b-a) (mu/lam)^{2+alpha} Gamma(alpha+2) cos(c) h^{lam-1}],  c = (b-a)/(2h).

    The minus sign comes from expanding sin(s c)/s around s = 1; it is what
    makes the A3 constant depend on the side of the lattice.
    """
    if not h > 0 or not a < b:
        raise ValueError("need h > 0 and a < b")
    ck = m.condition_k
    if ck is None:
        raise DomainError("tau_n needs Condition-K noise")
    r = ck.mu / ck.lam
    c = (b - a) / (2.0 * h)
    G1, G2 = math.gamma(k.alpha + 1.0), math.gamma(k.alpha + 2.0)
    return (k.A / math.pi) * (
        2.0 * r ** (1 + k.alpha) * G1 * math.sin(c)
        - (b - a) * r ** (2 + k.alpha) * G2 * math.cos(c) * h ** (ck.lam - 1.0)
    )


# ---------------------------------------------------------------------------
# Laplace-type expansions
# ---------------------------------------------------------------------------


def laplace_asymptotic(k: KernelSpec, eps: float, beta: float, lam: float, mu: float, lambda0: float, h: float) -> ScaledValue:
    """A ((mu/lam) h^lam)^{1+alpha+beta} e^{1/(mu h^lam)} Gamma(alpha+beta+1)."""
    _laplace_checks(eps, beta, lam, mu, h)
    p = 1.0 + k.alpha + beta
    log = math.log(k.A) + p * math.log((mu / lam) * h**lam) + 1.0 / (mu * h**lam) + math.lgamma(p)
    return scaled_normalize(ScaledValue(1.0, log))


def _laplace_checks(eps, beta, lam, mu, h):
    if not (0.0 <= eps < 1.0):
        raise ValueError("eps must lie in [0, 1)")
    if not beta >= 0:
        raise ValueError("beta must be nonnegative")
    if not (lam > 0 and mu > 0 and h > 0):
        raise ValueError("need lam, mu, h > 0")


def laplace_exact(
    k: KernelSpec,
    eps: float,
    beta: float,
    lam: float,
    mu: float,
    lambda0: float,
    h: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> ScaledValue:
    """int_eps^1 s^{-lam0} (1-s)^beta phi_w(s) e^{s^lam/(mu h^lam)} ds.

    With eps = 0 and lam0 != 0 the substitution s = v^p, p = 2/(1 - lam0),
    removes the algebraic endpoint behavior at 0 (needs lam0 < 1).
    """
    _laplace_checks(eps, beta, lam, mu, h)
    inv = 1.0 / (mu * h**lam)
    width = (mu / lam) * h**lam  # e-folding length of the weight at s = 1
    if lambda0 == 0.0 or eps > 0.0:

        def f(s):
            return (1.0 - s) ** beta * phi_w_eval(k, s) * s ** (-lambda0), inv * s**lam

        return integrate_scaled(f, eps, 1.0, spec, peak="hi", scale=0.5 * width)
    if lambda0 >= 1.0:
        raise ValueError("lam0 >= 1 makes the integral diverge at 0; give eps > 0")
    p = 2.0 / (1.0 - lambda0)

    def g(v):
        s = v**p
        return p * v * (1.0 - s) ** beta * phi_w_eval(k, s), inv * s**lam

    return integrate_scaled(g, 0.0, 1.0, spec, peak="hi", scale=0.5 * width / p)
