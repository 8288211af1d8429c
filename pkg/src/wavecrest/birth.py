"""Birth functions, their landmarks, and the one-dimensional dynamics of g.

A birth function is the nonlinearity ``g`` of the delayed equation.  The
typical example is Nicholson's ``g(s) = p s exp(-s)``.  Besides evaluating
``g`` this module locates the positive equilibrium ``kappa``, the maximiser
``s_M`` and the invariant interval ``[zeta1, zeta2]``, checks the
structural hypotheses by sampling, and iterates interval images of
unimodal maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, HypothesisError
from .expr import compile_expression

__all__ = [
    "BirthFunction",
    "Nicholson",
    "TruncatedLinear",
    "Custom",
    "Landmarks",
    "HypothesisReport",
    "IntervalIteration",
    "landmarks",
    "hypothesis_report",
    "truncate_linearize",
    "schwarzian",
    "interval_map_iterate",
    "interval_image",
    "birth_from_config",
]


def _fd_derivatives(f, s):
    """First three derivatives of ``f`` at ``s`` by 5-point central stencils.

    The third derivative uses a wider step: with 1e-4 the round-off term
    (~eps/h^3) already dominates.
    """
    scale = max(1.0, abs(s))
    h = 1e-4 * scale
    x = s + h * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    y = np.asarray(f(x), dtype=float)
    d1 = (y[0] - 8 * y[1] + 8 * y[3] - y[4]) / (12 * h)
    d2 = (-y[0] + 16 * y[1] - 30 * y[2] + 16 * y[3] - y[4]) / (12 * h * h)
    h3 = 2e-3 * scale
    x3 = s + h3 * np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0])
    y3 = np.asarray(f(x3), dtype=float)
    # 6-point, fourth-order stencil for f'''
    d3 = (y3[0] - 8 * y3[1] + 13 * y3[2] - 13 * y3[3] + 8 * y3[4] - y3[5]) / (8 * h3**3)
    return float(d1), float(d2), float(d3)


class BirthFunction:
    """Base class.  Subclasses implement ``__call__`` on numpy arrays."""

    name = "abstract"

    def __call__(self, s):
        raise NotImplementedError

    @property
    def analytic(self) -> bool:
        """True when ``derivatives`` uses closed forms."""
        return False

    def derivatives(self, s: float):
        """``(g'(s), g''(s), g'''(s))``."""
        return _fd_derivatives(self, float(s))

    def d1(self, s: float) -> float:
        return self.derivatives(s)[0]

    @property
    def slope0(self) -> float:
        """Right derivative ``g'(0)``."""
        h = 1e-7
        # second-order one-sided difference
        y = np.asarray(self(np.array([0.0, h, 2 * h])), dtype=float)
        return float((-3 * y[0] + 4 * y[1] - y[2]) / (2 * h))

    def sup_ratio(self) -> float:
        """``sup_{s>0} g(s)/s`` estimated on a log grid (plus the limit at 0)."""
        s = np.logspace(-8, 3, 20001)
        with np.errstate(invalid="ignore", over="ignore"):
            r = np.asarray(self(s), dtype=float) / s
        r = r[np.isfinite(r)]
        return float(max(self.slope0, r.max() if r.size else -np.inf))

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Nicholson(BirthFunction):
    """``g(s) = p s exp(-s)``."""

    p: float
    name = "nicholson"

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"nicholson needs p > 0, got {self.p}")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = self.p * s * np.exp(-s)
        return float(out) if out.ndim == 0 else out

    @property
    def analytic(self):
        return True

    def derivatives(self, s):
        e = self.p * math.exp(-s)
        return e * (1 - s), e * (s - 2), e * (3 - s)

    @property
    def slope0(self):
        return float(self.p)

    def sup_ratio(self):
        return float(self.p)

    def to_config(self):
        return {"family": "nicholson", "p": self.p}


@dataclass(frozen=True)
class Custom(BirthFunction):
    """User-supplied ``g`` with optional analytic derivatives."""

    func: Callable
    first: Optional[Callable] = None
    second: Optional[Callable] = None
    third: Optional[Callable] = None
    label: str = "custom"
    name = "custom"

    def __call__(self, s):
        out = np.asarray(self.func(np.asarray(s, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    @property
    def analytic(self):
        return None not in (self.first, self.second, self.third)

    def derivatives(self, s):
        if self.analytic:
            return float(self.first(s)), float(self.second(s)), float(self.third(s))
        fd = _fd_derivatives(self, float(s))
        given = [d for d in (self.first, self.second, self.third)]
        return tuple(float(g(s)) if g is not None else v for g, v in zip(given, fd))

    @property
    def slope0(self):
        if self.first is not None:
            return float(self.first(0.0))
        return BirthFunction.slope0.fget(self)

    @classmethod
    def from_expression(cls, text: str, params: dict | None = None) -> "Custom":
        return cls(compile_expression(text, params), label=text)

    def to_config(self):
        return {"family": "custom", "expr": self.label}


@dataclass(frozen=True, eq=False)
class TruncatedLinear(BirthFunction):
    """Approximation of ``g`` that is exactly linear near the origin.

    ``gamma_n(s) = k s`` on ``[0, 1/(n k)]``, ``1/n`` up to the first point
    ``s_n`` beyond the linear zone where ``g(s_n) = 1/n``, and ``g`` after
    that.  ``k = sup g(s)/s`` unless given.
    """

    base: BirthFunction
    n: int
    k: Optional[float] = None
    s_n: float = field(init=False)
    name = "truncated-linear"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("truncation level n must be a positive integer")
        k = float(self.k) if self.k is not None else self.base.sup_ratio()
        if not (np.isfinite(k) and k > 0):
            raise HypothesisError("sup g(s)/s must be finite and positive")
        object.__setattr__(self, "k", k)
        level = 1.0 / self.n
        start = 1.0 / (self.n * k)
        grid = start + np.concatenate([[0.0], np.logspace(-10, 3, 4000)])
        vals = np.asarray(self.base(grid), dtype=float)
        hit = np.nonzero(vals >= level)[0]
        if hit.size == 0 or level >= np.nanmax(vals):
            raise HypothesisError(
                f"n={self.n} too small: 1/n={level} is not below max g")
        i = int(hit[0])
        if i == 0:
            s_n = start
        else:
            s_n = brentq(lambda x: float(self.base(x)) - level, grid[i - 1], grid[i],
                         xtol=1e-15, rtol=1e-15)
        object.__setattr__(self, "s_n", float(s_n))

    @property
    def delta(self) -> float:
        """Width of the exactly-linear zone (the delta of hypothesis (L))."""
        return 1.0 / (self.n * self.k)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        base = np.asarray(self.base(s), dtype=float)
        out = np.where(s <= self.delta, self.k * s,
                       np.where(s <= self.s_n, 1.0 / self.n, base))
        return float(out) if out.ndim == 0 else out

    @property
    def analytic(self):
        return self.base.analytic

    def derivatives(self, s):
        if s < self.delta:
            return self.k, 0.0, 0.0
        if s < self.s_n:
            return 0.0, 0.0, 0.0
        return self.base.derivatives(s)

    @property
    def slope0(self):
        return self.k

    def sup_ratio(self):
        return self.k

    def to_config(self):
        cfg = dict(self.base.to_config())
        cfg["truncate_n"] = self.n
        return cfg


def truncate_linearize(g: BirthFunction, n: int) -> TruncatedLinear:
    """Piecewise approximation ``gamma_n`` of ``g`` satisfying hypothesis (L)."""
    return TruncatedLinear(g, int(n))


@dataclass(frozen=True)
class Landmarks:
    kappa: float
    s_M: Optional[float]
    zeta1: float
    zeta2: float
    slope0: float
    slope_kappa: float

    def as_dict(self):
        return {"kappa": self.kappa, "s_M": self.s_M, "zeta1": self.zeta1,
                "zeta2": self.zeta2, "slope0": self.slope0,
                "slope_kappa": self.slope_kappa}


def _positive_fixed_point(g: BirthFunction) -> float:
    if isinstance(g, Nicholson):
        if g.p <= 1:
            raise HypothesisError(f"nicholson with p={g.p} <= 1 has no positive fixed point")
        return math.log(g.p)
    s = np.concatenate([np.logspace(-10, 0, 2000), np.linspace(1.0, 1e3, 20000)[1:]])
    d = np.asarray(g(s), dtype=float) - s
    below = np.nonzero(d <= 0)[0]
    if below.size == 0 or d[0] <= 0:
        raise HypothesisError("g(s) = s has no positive solution")
    i = int(below[0])
    if d[i] == 0:
        return float(s[i])
    return float(brentq(lambda x: float(g(x)) - x, s[i - 1], s[i], xtol=1e-15, rtol=1e-15))


def _maximiser(g: BirthFunction, kappa: float):
    """``(s_M, sample_max)``; ``s_M`` is None when g is monotone on the sample."""
    if isinstance(g, Nicholson):
        return 1.0, g.p / math.e
    hi = 20.0 * max(1.0, kappa)
    s = np.linspace(0.0, hi, 20001)
    y = np.asarray(g(s), dtype=float)
    dy = np.sign(np.diff(y))
    nz = dy[dy != 0]
    turns = np.count_nonzero(nz[1:] != nz[:-1]) if nz.size else 0
    if turns > 1:
        raise HypothesisError(f"g has {turns} interior extrema on [0, {hi:g}], expected one")
    i = int(np.argmax(y))
    if turns == 0 or i in (0, s.size - 1):
        return None, float(y.max())
    res = minimize_scalar(lambda x: -float(g(x)), bracket=(s[i - 1], s[i], s[i + 1]),
                          method="golden", tol=1e-12)
    return float(res.x), float(-res.fun)


def _b_conditions(g: BirthFunction, zeta1: float, zeta2: float, kappa: float, n=2001):
    """Sampled conditions (B.1)-(B.3i) for the candidate interval."""
    tol = 1e-13 * max(1.0, zeta2)
    inner = np.linspace(zeta1, zeta2, n)
    gi = np.asarray(g(inner), dtype=float)
    lower = np.linspace(0.0, zeta1, n)[1:]
    gl = np.asarray(g(lower), dtype=float)
    return {
        "B1_invariant": bool(gi.min() >= zeta1 - tol and gi.max() <= zeta2 + tol),
        "B1_lower_into": bool(gl.min() >= -tol and gl.max() <= zeta2 + tol),
        "B2_min_at_left": bool(gi[0] <= gi.min() + tol),
        "B3_above_diagonal": bool(np.all(gl > lower)),
    }


def landmarks(g: BirthFunction) -> Landmarks:
    """``kappa``, ``s_M``, ``zeta1``, ``zeta2`` and the slopes at 0 and kappa.

    ``zeta1`` starts at ``min{g(g(s_M)), s_M}`` and is lowered by bisection
    until the sampled (B) conditions hold.
    """
    kappa = _positive_fixed_point(g)
    s_M, gmax = _maximiser(g, kappa)
    if s_M is not None:
        zeta2 = float(g(s_M))
        cand = min(float(g(zeta2)), s_M)
    else:
        zeta2 = max(kappa, gmax)
        cand = kappa

    def ok(z):
        return z > 0 and all(_b_conditions(g, z, zeta2, kappa).values())

    if ok(cand):
        zeta1 = cand
    else:
        lo = cand
        for _ in range(200):
            lo *= 0.5
            if ok(lo):
                break
        else:
            raise HypothesisError("no admissible zeta1 found below min{g^2(s_M), s_M}")
        hi = cand
        while hi - lo > 1e-10 * hi:
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        zeta1 = lo

    if isinstance(g, Nicholson):
        slope_kappa = 1.0 - math.log(g.p)
    else:
        slope_kappa = g.d1(kappa)
    return Landmarks(kappa=kappa, s_M=s_M, zeta1=zeta1, zeta2=zeta2,
                     slope0=g.slope0, slope_kappa=slope_kappa)


@dataclass
class HypothesisReport:
    H: bool
    B: bool
    L: bool
    SL: bool
    delta_L: float = 0.0
    witnesses: dict = field(default_factory=dict)

    def as_dict(self):
        return {"H": self.H, "B": self.B, "L": self.L, "SL": self.SL,
                "delta_L": self.delta_L, "witnesses": dict(self.witnesses)}


def hypothesis_report(g: BirthFunction, n: int = 10001) -> HypothesisReport:
    """Check (H), (B), (L) and (SL) by sampling; failures carry a witness."""
    wit = {}
    try:
        lm = landmarks(g)
    except HypothesisError as exc:
        wit["landmarks"] = str(exc)
        return HypothesisReport(False, False, False, False, 0.0, wit)

    top = 3.0 * lm.zeta2
    s = np.unique(np.concatenate([np.linspace(0.0, top, n), np.logspace(-10, math.log10(top), n)]))
    y = np.asarray(g(s), dtype=float)
    p = lm.slope0

    H = True
    if abs(y[0]) > 1e-14:
        H = False
        wit["H_g0"] = float(y[0])
    if np.any(y[1:] <= 0):
        H = False
        wit["H_nonpositive_at"] = float(s[1:][y[1:] <= 0][0])
    d = y[1:] - s[1:]
    crossings = np.count_nonzero(np.sign(d[1:]) != np.sign(d[:-1]))
    if crossings != 1:
        H = False
        wit["H_fixed_point_crossings"] = int(crossings)
    if not p > 1:
        H = False
        wit["H_slope0"] = p
    if lm.s_M is None:
        wit["H_note"] = "g is monotone on the sample (no interior maximum)"

    bcond = _b_conditions(g, lm.zeta1, lm.zeta2, lm.kappa)
    B = all(bcond.values()) and p > 1 and crossings == 1
    if not B:
        wit["B_conditions"] = bcond

    if isinstance(g, Nicholson):
        SL = True
    else:
        viol = y - p * s > 1e-12 * np.maximum(1.0, p * s)
        SL = not np.any(viol)
        if not SL:
            wit["SL_violated_at"] = float(s[viol][0])

    if isinstance(g, TruncatedLinear):
        delta = g.delta
    else:
        probe = np.logspace(-9, math.log10(max(lm.zeta2, 1e-8)), 400)
        lin = np.abs(np.asarray(g(probe), dtype=float) - p * probe) <= 1e-12 * np.maximum(1e-300, p * probe)
        bad = np.nonzero(~lin)[0]
        delta = float(probe[bad[0] - 1]) if bad.size and bad[0] > 0 else (0.0 if bad.size else float(probe[-1]))
    bounded = bool(np.all(np.isfinite(np.asarray(g(np.linspace(0.0, 100.0 * max(1.0, lm.zeta2), 2001))))))
    L = delta > 0 and bounded and SL and p > 1
    if not L:
        wit["L_linear_zone"] = delta
    return HypothesisReport(H=H, B=B, L=L, SL=SL, delta_L=delta, witnesses=wit)


def schwarzian(g: BirthFunction, s: float) -> float:
    """``g'''/g' - 1.5 (g''/g')^2`` at ``s``; undefined where ``g'(s) = 0``."""
    d1, d2, d3 = g.derivatives(float(s))
    if d1 == 0 or (not g.analytic and abs(d1) < 1e-10):
        raise DomainError(f"Schwarzian undefined at critical point s={s}")
    r = d2 / d1
    return d3 / d1 - 1.5 * r * r


def interval_image(f, a: float, b: float, maximizer: Optional[float] = None):
    """Exact image of ``[a, b]`` under a monotone or unimodal ``f``."""
    pts = [a, b]
    if maximizer is not None and a < maximizer < b:
        pts.append(maximizer)
    vals = [float(f(x)) for x in pts]
    if not all(np.isfinite(vals)):
        raise ValueError(f"map undefined on interval [{a}, {b}]")
    return min(vals), max(vals)


@dataclass
class IntervalIteration:
    converged: bool
    final: tuple
    history: list
    reason: str


def interval_map_iterate(f, I0, max_iter: int = 5000, tol: float = 1e-10,
                         maximizer: Optional[float] = None,
                         kappa: Optional[float] = None) -> IntervalIteration:
    """Iterate ``I_{k+1} = f(I_k)`` on intervals.

    Converged means the interval shrank below ``tol`` around ``kappa`` (when
    given).  Iteration also stops when successive intervals stop moving,
    which for a map with an attracting cycle leaves the cycle's hull.
    """
    a, b = float(I0[0]), float(I0[1])
    if a > b:
        raise ValueError("interval endpoints out of order")
    history = [(a, b)]
    for _ in range(max_iter):
        na, nb = interval_image(f, a, b, maximizer)
        history.append((na, nb))
        if nb - na < tol and (kappa is None or na - tol <= kappa <= nb + tol):
            return IntervalIteration(True, (na, nb), history, "width below tolerance")
        if abs(na - a) <= 1e-15 * max(1.0, abs(a)) and abs(nb - b) <= 1e-15 * max(1.0, abs(b)):
            return IntervalIteration(False, (na, nb), history, "stalled on invariant interval")
        a, b = na, nb
    return IntervalIteration(False, (a, b), history, "max_iter reached")


def birth_from_config(family: str, params: dict) -> BirthFunction:
    """Build a birth function from config ``{family, params}``.

    ``truncate_n`` wraps the result in :class:`TruncatedLinear`.
    """
    params = dict(params)
    n = params.pop("truncate_n", None)
    family = family.strip().lower()
    if family == "nicholson":
        unknown = set(params) - {"p"}
        if unknown:
            raise ValueError(f"unknown nicholson parameter(s): {sorted(unknown)}")
        g = Nicholson(float(params["p"]))
    elif family == "custom":
        if "expr" not in params:
            raise ValueError("custom birth function needs 'expr'")
        text = params.pop("expr")
        g = Custom.from_expression(text, {k: float(v) for k, v in params.items()})
    else:
        raise ValueError(f"unknown birth family {family!r}")
    if n is not None:
        g = truncate_linearize(g, int(float(n)))
    return g
