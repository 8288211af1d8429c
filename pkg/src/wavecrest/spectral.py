"""Characteristic function of the linearised wave equation and critical speeds.

For a travelling front ``u(x, t) = phi(x + c t)`` written in the scaled
variable ``eps = 1/c^2``, the linearisation at the trivial state leads to

    psi(z, eps) = eps z^2 - z - q + p exp(-z h) mgf(sqrt(eps) z),

which is strictly convex in ``z``.  Positive roots exist exactly for
``eps <= eps0`` and negative roots exactly for ``eps >= eps1``.  Both
thresholds are located by bisection on those monotone predicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, KernelRangeError
from .kernels import Kernel

__all__ = [
    "CharFunction",
    "SpectralReport",
    "psi",
    "psi_prime",
    "minimize_psi",
    "positive_roots",
    "negative_roots",
    "critical_eps0",
    "critical_eps1",
    "nega_minimum",
    "speeds",
    "kappa_char_negative_root",
    "eps_quadratic_roots",
]

_LOG_MAX = math.log(np.finfo(float).max)
_EPS_MIN = 1e-6
_EPS_MAX = 1e12
_MAX_DOUBLINGS = 200


@dataclass(frozen=True)
class CharFunction:
    eps: float
    h: float
    p: float
    q: float
    kernel: Kernel

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.h >= 0:
            raise ValueError(f"delay h must be nonnegative, got {self.h}")
        if not (self.p > 0 and self.q > 0):
            raise ValueError(f"p and q must be positive, got p={self.p}, q={self.q}")

    def with_eps(self, eps: float) -> "CharFunction":
        return CharFunction(eps, self.h, self.p, self.q, self.kernel)

    def __call__(self, z):
        return psi(self, z)


def _exp_term(cf: CharFunction, z):
    """``log(p exp(-z h) mgf(sqrt(eps) z))`` without overflow."""
    r = math.sqrt(cf.eps)
    return math.log(cf.p) - z * cf.h + cf.kernel.log_mgf(r * z)


def psi(cf: CharFunction, z):
    z_arr = np.asarray(z, dtype=float)
    lt = np.asarray(_exp_term(cf, z_arr), dtype=float)
    if np.any(lt > _LOG_MAX):
        bad = float(z_arr[lt > _LOG_MAX].flat[0]) if z_arr.ndim else float(z_arr)
        raise KernelRangeError(f"psi overflows at z={bad!r}", w=bad)
    out = cf.eps * z_arr * z_arr - z_arr - cf.q + np.exp(lt)
    return float(out) if np.ndim(z) == 0 else out


def psi_prime(cf: CharFunction, z: float) -> float:
    """Exact z-derivative, using the kernel's log-mgf derivative."""
    r = math.sqrt(cf.eps)
    lt = _exp_term(cf, z)
    if lt > _LOG_MAX:
        raise KernelRangeError(f"psi' overflows at z={z!r}", w=z)
    slope = -cf.h + r * cf.kernel.dlog_mgf(r * z)
    return 2 * cf.eps * z - 1 + math.exp(lt) * slope


def _bisect_derivative(df, lo, hi, tol=1e-12):
    """Zero of an increasing function with ``df(lo) < 0 < df(hi)``."""
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        d = df(mid)
        if abs(d) < tol:
            return mid
        if d < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def minimize_psi(cf: CharFunction, side: int = 1) -> tuple[float, float]:
    """Minimiser and minimum of ``psi`` over ``z >= 0`` (side=+1) or ``z <= 0``.

    Convexity makes the derivative increasing, so the minimiser is the
    unique sign change of ``psi'`` on the half line (or the origin).
    """
    def df(z):
        try:
            return psi_prime(cf, z)
        except KernelRangeError:
            # the log of the exponential term is convex and finite at 0, so
            # once it overflows at z its slope has the sign of z
            return math.copysign(math.inf, z)

    d0 = df(0.0)
    if side > 0:
        if d0 >= 0:
            return 0.0, psi(cf, 0.0)
        lo, hi = 0.0, 1.0
        for _ in range(_MAX_DOUBLINGS):
            if df(hi) > 0:
                break
            lo, hi = hi, 2 * hi
        else:
            raise BracketError("psi' stays negative on z > 0; mgf grows too slowly")
    else:
        if d0 <= 0:
            return 0.0, psi(cf, 0.0)
        lo, hi = -1.0, 0.0
        for _ in range(_MAX_DOUBLINGS):
            if df(lo) < 0:
                break
            lo, hi = 2 * lo, lo
        else:
            raise BracketError("psi' stays positive on z < 0")
    z = _bisect_derivative(df, lo, hi)
    return z, psi(cf, z)


def _roots_around(fun, zmin, fmin, side):
    """Two roots of a convex function on either side of its negative minimum."""
    if fmin > 0:
        return None
    if fmin == 0:
        return zmin, zmin
    inner = 0.0
    if side > 0:
        near = brentq(fun, inner, zmin, xtol=1e-300, rtol=1e-15, maxiter=500)
    else:
        near = brentq(fun, zmin, inner, xtol=1e-300, rtol=1e-15, maxiter=500)
    step = max(abs(zmin), 1.0)
    far = zmin + side * step
    for _ in range(_MAX_DOUBLINGS):
        if fun(far) > 0:
            break
        step *= 2
        far = zmin + side * step
    else:
        raise BracketError("could not bracket the outer root within 200 doublings")
    a, b = sorted((zmin, far))
    other = brentq(fun, a, b, xtol=1e-300, rtol=1e-15, maxiter=500)
    return tuple(sorted((near, other)))


def _psi_capped(cf: CharFunction):
    """``psi`` with overflow mapped to a huge positive value (it is +inf there)."""
    def fun(z):
        try:
            return psi(cf, z)
        except KernelRangeError:
            return 1e300
    return fun


def positive_roots(cf: CharFunction):
    """``(lambda1, lambda2)`` with ``0 < lambda1 <= lambda2`` or ``None``."""
    if not cf.p > cf.q:
        raise ValueError(f"positive_roots needs p > q, got p={cf.p}, q={cf.q}")
    zmin, fmin = minimize_psi(cf, side=1)
    return _roots_around(_psi_capped(cf), zmin, fmin, side=1)


def negative_roots(cf: CharFunction):
    """``(mu1, mu2)`` with ``mu1 <= mu2 < 0`` or ``None``."""
    zmin, fmin = minimize_psi(cf, side=-1)
    return _roots_around(_psi_capped(cf), zmin, fmin, side=-1)


def _has_positive_root(h, p, q, kernel, eps):
    return minimize_psi(CharFunction(eps, h, p, q, kernel), 1)[1] <= 0


def _has_negative_root(h, p, q, kernel, eps):
    return minimize_psi(CharFunction(eps, h, p, q, kernel), -1)[1] <= 0


def _bisect_threshold(pred, lo, hi, rtol):
    """``pred`` flips between ``lo`` and ``hi``; returns the switch point."""
    flag_lo = pred(lo)
    while hi - lo > rtol * lo:
        mid = math.sqrt(lo * hi) if hi > 4 * lo else 0.5 * (lo + hi)
        if pred(mid) == flag_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical_eps0(h: float, p: float, q: float, kernel: Kernel, rtol: float = 1e-12) -> float:
    """Largest ``eps`` for which ``psi(., eps)`` has positive roots (``inf`` if none)."""
    if not p > q > 0:
        raise ValueError(f"critical_eps0 needs p > q > 0, got p={p}, q={q}")
    pred = lambda e: _has_positive_root(h, p, q, kernel, e)  # noqa: E731
    lo = _EPS_MIN
    if not pred(lo):
        raise BracketError(f"no positive characteristic root even at eps={lo:g}")
    hi = lo * 4
    while pred(hi):
        lo = hi
        if lo >= _EPS_MAX:
            return math.inf
        hi = min(hi * 4, _EPS_MAX)
    return _bisect_threshold(pred, lo, hi, rtol)


def nega_minimum(p: float, q: float, kernel: Kernel) -> tuple[float, float]:
    """Minimiser and minimum over ``z <= 0`` of ``z^2 - q + p mgf(z)``.

    This is the large-``eps`` limit of ``psi / eps`` after rescaling, whose
    negative roots decide whether ``eps1`` is finite.
    """
    def df(z):
        return 2 * z + p * kernel.dlog_mgf(z) * math.exp(kernel.log_mgf(z))

    if df(0.0) <= 0:
        return 0.0, p - q
    lo, hi = -1.0, 0.0
    for _ in range(_MAX_DOUBLINGS):
        if df(lo) < 0:
            break
        lo, hi = 2 * lo, lo
    else:
        raise BracketError("nega derivative stays positive on z < 0")
    z = _bisect_derivative(df, lo, hi)
    return z, z * z - q + p * kernel.mgf(z)


def critical_eps1(h: float, p: float, q: float, kernel: Kernel, rtol: float = 1e-12) -> float:
    """Smallest ``eps`` for which ``psi(., eps)`` has negative roots (``inf`` if none)."""
    if not p > q > 0:
        raise ValueError(f"critical_eps1 needs p > q > 0, got p={p}, q={q}")
    if kernel.first_moment() >= 0:
        return math.inf
    _, fmin = nega_minimum(p, q, kernel)
    if fmin > 0:
        return math.inf
    pred = lambda e: _has_negative_root(h, p, q, kernel, e)  # noqa: E731
    lo = _EPS_MIN
    if pred(lo):
        return lo
    hi = lo * 4
    while not pred(hi):
        lo = hi
        if lo >= _EPS_MAX:
            return math.inf
        hi = min(hi * 4, _EPS_MAX)
    return _bisect_threshold(pred, lo, hi, rtol)


def _speed(eps: float) -> float:
    return 0.0 if math.isinf(eps) else 1.0 / math.sqrt(eps)


def _num(x):
    if x is None:
        return None
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass(frozen=True)
class SpectralReport:
    eps0: float
    eps1: float
    c_star: float
    c_sharp: float
    c_tilde_star: float
    eps0_tilde: float
    p: float
    q: float
    k: float
    h: float
    sl_holds: bool
    roots_at_eps: tuple | None = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "eps0": _num(self.eps0),
            "eps1": _num(self.eps1),
            "c_star": self.c_star,
            "c_sharp": self.c_sharp,
            "c_tilde_star": self.c_tilde_star,
            "eps0_tilde": _num(self.eps0_tilde),
            "p": self.p,
            "q": self.q,
            "k": self.k,
            "h": self.h,
            "sl_holds": self.sl_holds,
            "lambda1": self.roots_at_eps[0] if self.roots_at_eps else None,
            "lambda2": self.roots_at_eps[1] if self.roots_at_eps else None,
        }
        out.update({key: _num(v) for key, v in self.diagnostics.items()})
        return out


def convexity_check(cf: CharFunction, n: int = 64) -> bool:
    """Second differences of ``psi`` are positive on a sample of ``z``."""
    scale = 4.0 / max(math.sqrt(cf.eps), 1e-3)
    z = np.linspace(-scale, scale, n)
    step = 1e-3 * scale
    try:
        second = psi(cf, z + step) - 2 * psi(cf, z) + psi(cf, z - step)
    except KernelRangeError:
        return False
    return bool(np.all(second > 0))


def speeds(h: float, kernel: Kernel, g, q: float = 1.0, eps: float | None = None) -> SpectralReport:
    """Critical speeds for birth function ``g`` and kernel ``kernel``.

    ``eps`` optionally asks for the positive roots at that parameter.
    """
    p = float(g.slope0)
    if not p > q:
        raise ValueError(f"need g'(0) > q, got g'(0)={p}, q={q}")
    k = float(g.sup_ratio())
    eps0 = critical_eps0(h, p, q, kernel)
    eps1 = critical_eps1(h, p, q, kernel)
    sl = abs(k - p) <= 1e-9 * p
    eps0_tilde = eps0 if sl else critical_eps0(h, k, q, kernel)
    m1 = kernel.first_moment()
    diag = {
        "first_moment": m1,
        "lower_bound_am": abs(m1) / (h + 1.0 / p) if m1 <= 0 else None,
        "convexity_check": convexity_check(CharFunction(eps0 if math.isfinite(eps0) else 1.0, h, p, q, kernel)),
    }
    roots = None
    if eps is not None:
        roots = positive_roots(CharFunction(eps, h, p, q, kernel))
    return SpectralReport(
        eps0=eps0,
        eps1=eps1,
        c_star=_speed(eps0),
        c_sharp=_speed(eps1),
        c_tilde_star=_speed(eps0_tilde),
        eps0_tilde=eps0_tilde,
        p=p,
        q=q,
        k=k,
        h=h,
        sl_holds=sl,
        roots_at_eps=roots,
        diagnostics=diag,
    )


def eps_quadratic_roots(eps: float) -> tuple[float, float]:
    """Roots ``lam < 0 < mu`` of ``eps z^2 - z - 1``, free of cancellation."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    root = math.sqrt(1.0 + 4.0 * eps)
    return -2.0 / (1.0 + root), (1.0 + root) / (2.0 * eps)


def _tail_char(c, h, slope, kernel, z):
    """``(z/c)^2 - z - 1 + slope exp(-z h) mgf(z/c)`` with overflow mapped to +-inf."""
    z = np.asarray(z, dtype=float)
    poly = (z / c) ** 2 - z - 1.0
    if slope == 0:
        return poly
    lt = -z * h + np.asarray(kernel.log_mgf(z / c), dtype=float)
    big = lt > _LOG_MAX - 1.0
    with np.errstate(over="ignore"):
        term = slope * np.exp(np.where(big, 0.0, lt))
    term = np.where(big, math.copysign(math.inf, slope), term)
    return poly + term


def kappa_char_negative_root(c: float, h: float, slope_kappa: float, kernel: Kernel, n: int = 10_000) -> dict:
    """Scan the front-tail characteristic function at the equilibrium for negative roots.

    Returns ``{"has_root", "witness", "max_value", "z_low"}``; ``witness`` is
    a refined root when one is found.
    """
    if not c > 0:
        raise ValueError(f"speed must be positive, got {c}")
    n = max(int(n), 10_000)
    fun = lambda z: float(_tail_char(c, h, slope_kappa, kernel, z))  # noqa: E731

    # widen until the exponential dominates the quadratic by 1e3
    z_low = -50.0
    if slope_kappa != 0:
        for _ in range(60):
            lt = -z_low * h + kernel.log_mgf(z_low / c)
            poly = (z_low / c) ** 2 + abs(z_low) + 1.0
            if lt + math.log(abs(slope_kappa)) >= math.log(1e3 * poly) or abs(z_low) >= 1e8:
                break
            z_low *= 2

    z = -np.logspace(math.log10(abs(z_low)), -12, n)
    vals = _tail_char(c, h, slope_kappa, kernel, z)
    vals = np.append(vals, fun(0.0))
    z = np.append(z, 0.0)
    pos = np.nonzero(vals > 0)[0]
    finite = vals[np.isfinite(vals)]
    vmax = float(np.max(finite)) if finite.size else -math.inf
    if pos.size == 0:
        return {"has_root": False, "witness": None, "max_value": vmax, "z_low": z_low}
    # a sign change next to the first positive sample (ordered left to right)
    i = int(pos[-1])
    j = i + 1 if i + 1 < len(z) and vals[i + 1] <= 0 else i - 1
    if j < 0 or vals[j] > 0:
        return {"has_root": True, "witness": float(z[i]), "max_value": vmax, "z_low": z_low}
    a, b = sorted((z[i], z[j]))
    root = brentq(fun, a, b, xtol=1e-14, rtol=1e-14)
    return {"has_root": True, "witness": float(root), "max_value": vmax, "z_low": z_low}
