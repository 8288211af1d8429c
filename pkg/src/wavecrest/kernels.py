"""Convolution kernels with finite two-sided exponential moments.

Every kernel is a probability density (or a point mass) on the real line.
The moment generating function is taken with the sign convention

    mgf(w) = integral K(s) exp(-w s) ds,

which is the form that appears in the characteristic function of the
wave equation.  All kernels are immutable and safe to share between
threads.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import KernelRangeError

__all__ = [
    "Kernel",
    "Dirac",
    "Gaussian",
    "Uniform",
    "Tabulated",
    "Mixture",
    "LinearTerm",
    "mgf",
    "partial_mass",
    "first_moment",
    "aggregate_linearization",
    "kernel_from_config",
    "load_tabulated_csv",
]

_LOG_MAX = math.log(np.finfo(float).max)
_SQRT2 = math.sqrt(2.0)


def _scalar_or_array(x, like):
    if np.ndim(like) == 0:
        return float(x)
    return x


class Kernel:
    """Common interface; concrete families override the ``_log_mgf`` etc."""

    family = "abstract"

    def log_mgf(self, w):
        """Natural log of ``mgf(w)``; never overflows for finite ``w``."""
        w_arr = np.asarray(w, dtype=float)
        return _scalar_or_array(self._log_mgf(w_arr), w)

    def mgf(self, w):
        w_arr = np.asarray(w, dtype=float)
        lm = self._log_mgf(w_arr)
        bad = lm > _LOG_MAX
        if np.any(bad):
            w_bad = w_arr[bad].flat[0] if w_arr.ndim else float(w_arr)
            raise KernelRangeError(
                f"mgf overflow for {self.family} kernel at w={w_bad!r}", w=float(w_bad)
            )
        return _scalar_or_array(np.exp(lm), w)

    def mgf_prime(self, w):
        """Derivative of ``mgf`` with respect to ``w``, i.e. ``-int s K e^{-ws}``."""
        w_arr = np.asarray(w, dtype=float)
        return _scalar_or_array(self._mgf_prime(w_arr), w)

    def dlog_mgf(self, w):
        """``mgf'(w) / mgf(w)``: minus the mean of the exponentially tilted kernel."""
        w_arr = np.asarray(w, dtype=float)
        return _scalar_or_array(self._dlog_mgf(w_arr), w)

    def partial_mass(self, a: float, b: float) -> float:
        if a > b:
            raise ValueError(f"partial_mass needs a <= b, got a={a}, b={b}")
        if a == b:
            return 0.0
        return min(1.0, max(0.0, self._partial_mass(float(a), float(b))))

    def first_moment(self) -> float:
        raise NotImplementedError

    def quadrature(self, spacing: float = 0.05):
        """Nodes and weights with ``sum(weights * f(nodes)) ~ int K f``.

        ``spacing`` bounds the node spacing for families integrated by
        the composite trapezoid rule; weights always sum to one.
        """
        raise NotImplementedError

    def scale(self) -> float:
        """Rough width of the kernel: ``|mean| + spread``."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    # families fill these in
    def _log_mgf(self, w):  # pragma: no cover - abstract
        raise NotImplementedError

    def _mgf_prime(self, w):  # pragma: no cover - abstract
        raise NotImplementedError

    def _partial_mass(self, a, b):  # pragma: no cover - abstract
        raise NotImplementedError

    def _dlog_mgf(self, w):
        return self._mgf_prime(w) / np.exp(self._log_mgf(w))


@dataclass(frozen=True)
class Dirac(Kernel):
    """Point mass at ``shift``."""

    shift: float = 0.0
    family = "dirac"

    def _log_mgf(self, w):
        return -w * self.shift

    def _mgf_prime(self, w):
        return -self.shift * np.exp(-w * self.shift)

    def _dlog_mgf(self, w):
        return np.full_like(w, -self.shift, dtype=float)

    def _partial_mass(self, a, b):
        return 1.0 if a <= self.shift <= b else 0.0

    def first_moment(self):
        return float(self.shift)

    def quadrature(self, spacing=0.05):
        return np.array([self.shift], dtype=float), np.array([1.0])

    def scale(self):
        return abs(self.shift)

    def to_config(self):
        return {"family": "dirac", "shift": self.shift}


@dataclass(frozen=True)
class Gaussian(Kernel):
    """Heat kernel ``(4 pi alpha)^(-1/2) exp(-(s - shift)^2 / (4 alpha))``.

    The variance is ``2 * alpha``.
    """

    alpha: float
    shift: float = 0.0
    nodes: int = 48
    family = "gaussian"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"gaussian kernel needs alpha > 0, got {self.alpha}")
        if self.nodes < 40:
            raise ValueError("gaussian quadrature needs at least 40 Hermite nodes")

    @property
    def sigma(self) -> float:
        return math.sqrt(2.0 * self.alpha)

    def density(self, s):
        s = np.asarray(s, dtype=float)
        a = self.alpha
        return np.exp(-((s - self.shift) ** 2) / (4 * a)) / math.sqrt(4 * math.pi * a)

    def _log_mgf(self, w):
        return -w * self.shift + self.alpha * w * w

    def _mgf_prime(self, w):
        return (2 * self.alpha * w - self.shift) * np.exp(self._log_mgf(w))

    def _dlog_mgf(self, w):
        return 2 * self.alpha * w - self.shift

    def _partial_mass(self, a, b):
        # erfc on the tail side of the mean avoids cancellation far out
        za = (a - self.shift) / (self.sigma * _SQRT2)
        zb = (b - self.shift) / (self.sigma * _SQRT2)
        if za >= 0:
            return 0.5 * (math.erfc(za) - math.erfc(zb))
        if zb <= 0:
            return 0.5 * (math.erfc(-zb) - math.erfc(-za))
        return 1.0 - 0.5 * math.erfc(-za) - 0.5 * math.erfc(zb)

    def first_moment(self):
        return float(self.shift)

    def quadrature(self, spacing=0.05):
        x, wts = np.polynomial.hermite.hermgauss(self.nodes)
        return self.shift + 2.0 * math.sqrt(self.alpha) * x, wts / math.sqrt(math.pi)

    def scale(self):
        return abs(self.shift) + 4.0 * self.sigma

    def to_config(self):
        return {"family": "gaussian", "alpha": self.alpha, "shift": self.shift}


def _log_sinhc(x):
    """log(sinh(x)/x), accurate for small and very large |x|."""
    ax = np.abs(x)
    small = ax < 1e-3
    safe = np.where(small, 1.0, ax)
    big = safe - np.log(2.0 * safe) + np.log1p(-np.exp(-2.0 * safe))
    x2 = ax * ax
    return np.where(small, x2 / 6.0 - x2 * x2 / 180.0, big)


def _dlog_sinhc(x):
    """d/dx log(sinh(x)/x) = coth(x) - 1/x."""
    ax = np.abs(x)
    small = ax < 1e-3
    safe = np.where(small, 1.0, x)
    big = 1.0 / np.tanh(safe) - 1.0 / safe
    return np.where(small, x / 3.0 - x**3 / 45.0, big)


@dataclass(frozen=True)
class Uniform(Kernel):
    """Uniform density on ``[shift - eta, shift + eta]``."""

    eta: float
    shift: float = 0.0
    family = "uniform"

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"uniform kernel needs eta > 0, got {self.eta}")

    def density(self, s):
        s = np.asarray(s, dtype=float)
        inside = np.abs(s - self.shift) <= self.eta
        return np.where(inside, 0.5 / self.eta, 0.0)

    def _log_mgf(self, w):
        return -w * self.shift + _log_sinhc(w * self.eta)

    def _mgf_prime(self, w):
        return self._dlog_mgf(w) * np.exp(self._log_mgf(w))

    def _dlog_mgf(self, w):
        return -self.shift + self.eta * _dlog_sinhc(w * self.eta)

    def _partial_mass(self, a, b):
        lo = max(a, self.shift - self.eta)
        hi = min(b, self.shift + self.eta)
        return max(0.0, hi - lo) / (2.0 * self.eta)

    def first_moment(self):
        return float(self.shift)

    def quadrature(self, spacing=0.05):
        m = max(8, int(math.ceil(2.0 * self.eta / spacing)))
        nodes = np.linspace(self.shift - self.eta, self.shift + self.eta, m + 1)
        wts = np.full(m + 1, 1.0 / m)
        wts[0] = wts[-1] = 0.5 / m
        return nodes, wts

    def scale(self):
        return abs(self.shift) + self.eta

    def to_config(self):
        return {"family": "uniform", "eta": self.eta, "shift": self.shift}


@dataclass(frozen=True, eq=False)
class Tabulated(Kernel):
    """Piecewise-linear density sampled on a uniform grid with compact support.

    The density is renormalised to unit trapezoid mass on construction.
    """

    s: np.ndarray
    values: np.ndarray
    family = "tabulated"
    _weights: np.ndarray = field(init=False, repr=False)
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        v = np.array(self.values, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or s.size < 2:
            raise ValueError("tabulated kernel needs matching 1-d arrays of length >= 2")
        ds = np.diff(s)
        if np.any(ds <= 0) or not np.allclose(ds, ds[0], rtol=1e-9, atol=0.0):
            raise ValueError("tabulated kernel requires a strictly increasing uniform grid")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("tabulated kernel density must be finite and nonnegative")
        step = ds[0]
        w = np.full(s.size, step)
        w[0] = w[-1] = 0.5 * step
        mass = float(np.dot(w, v))
        if mass <= 0:
            raise ValueError("tabulated kernel has zero mass")
        if abs(mass - 1.0) > 1e-6:
            warnings.warn(
                f"tabulated kernel mass {mass:.9g} renormalised to 1", stacklevel=3
            )
        v = v / mass
        cum = np.concatenate([[0.0], np.cumsum(0.5 * step * (v[1:] + v[:-1]))])
        for name, arr in (("s", s), ("values", v), ("_weights", w), ("_cum", cum)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def step(self) -> float:
        return float(self.s[1] - self.s[0])

    def density(self, x):
        return np.interp(np.asarray(x, dtype=float), self.s, self.values, left=0.0, right=0.0)

    def _log_mgf(self, w):
        w = np.asarray(w, dtype=float)
        b = self._weights * self.values
        expo = -np.multiply.outer(w, self.s)
        return logsumexp(expo, b=b, axis=-1)

    def _mgf_prime(self, w):
        w = np.asarray(w, dtype=float)
        b = -self._weights * self.values * self.s
        expo = -np.multiply.outer(w, self.s)
        val, sign = logsumexp(expo, b=b, axis=-1, return_sign=True)
        return sign * np.exp(val)

    def _dlog_mgf(self, w):
        w = np.asarray(w, dtype=float)
        expo = -np.multiply.outer(w, self.s)
        base = self._weights * self.values
        num, sign = logsumexp(expo, b=-base * self.s, axis=-1, return_sign=True)
        den = logsumexp(expo, b=base, axis=-1)
        return sign * np.exp(num - den)

    def _cdf(self, x):
        s, v, cum = self.s, self.values, self._cum
        if x <= s[0]:
            return 0.0
        if x >= s[-1]:
            return float(cum[-1])
        i = int(np.searchsorted(s, x, side="right")) - 1
        dx = x - s[i]
        slope = (v[i + 1] - v[i]) / self.step
        return float(cum[i] + v[i] * dx + 0.5 * slope * dx * dx)

    def _partial_mass(self, a, b):
        return self._cdf(b) - self._cdf(a)

    def first_moment(self):
        return float(np.dot(self._weights, self.s * self.values))

    def quadrature(self, spacing=0.05):
        refine = max(1, int(math.ceil(self.step / spacing)))
        if refine == 1:
            nodes = self.s.copy()
            dens = self.values
        else:
            nodes = np.linspace(self.s[0], self.s[-1], refine * (self.s.size - 1) + 1)
            dens = self.density(nodes)
        h = nodes[1] - nodes[0]
        wts = np.full(nodes.size, h) * dens
        wts[0] *= 0.5
        wts[-1] *= 0.5
        return nodes, wts / wts.sum()

    def scale(self):
        return max(abs(self.s[0]), abs(self.s[-1]))

    def to_config(self):
        return {"family": "tabulated", "points": int(self.s.size),
                "support": [float(self.s[0]), float(self.s[-1])]}


@dataclass(frozen=True)
class Mixture(Kernel):
    """Convex combination of member kernels."""

    weights: tuple
    members: tuple
    family = "mixture"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.members) or not self.members:
            raise ValueError("mixture needs one weight per member")
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("mixture weights must be nonnegative with positive sum")
        object.__setattr__(self, "weights", tuple(float(x) for x in w / w.sum()))
        object.__setattr__(self, "members", tuple(self.members))

    def _log_mgf(self, w):
        parts = np.stack([np.asarray(k._log_mgf(w), dtype=float) for k in self.members])
        logw = np.log(np.asarray(self.weights)).reshape((-1,) + (1,) * (parts.ndim - 1))
        return logsumexp(parts + logw, axis=0)

    def _mgf_prime(self, w):
        return sum(a * k._mgf_prime(w) for a, k in zip(self.weights, self.members))

    def _dlog_mgf(self, w):
        parts = np.stack([np.asarray(k._log_mgf(w), dtype=float) for k in self.members])
        logw = np.log(np.asarray(self.weights)).reshape((-1,) + (1,) * (parts.ndim - 1))
        lw = parts + logw
        resp = np.exp(lw - logsumexp(lw, axis=0))
        dl = np.stack([np.asarray(k._dlog_mgf(w), dtype=float) for k in self.members])
        return np.sum(resp * dl, axis=0)

    def _partial_mass(self, a, b):
        return sum(wt * k.partial_mass(a, b) for wt, k in zip(self.weights, self.members))

    def first_moment(self):
        return float(sum(wt * k.first_moment() for wt, k in zip(self.weights, self.members)))

    def quadrature(self, spacing=0.05):
        nodes, wts = [], []
        for a, k in zip(self.weights, self.members):
            n, w = k.quadrature(spacing)
            nodes.append(n)
            wts.append(a * w)
        return np.concatenate(nodes), np.concatenate(wts)

    def scale(self):
        return max(k.scale() for k in self.members)

    def to_config(self):
        return {"family": "mixture", "weights": list(self.weights),
                "members": [k.to_config() for k in self.members]}


def mgf(kernel: Kernel, w):
    """``int K(s) exp(-w s) ds``; raises :class:`KernelRangeError` on overflow."""
    return kernel.mgf(w)


def partial_mass(kernel: Kernel, a: float, b: float) -> float:
    """Mass of the kernel on ``[a, b]`` (infinite endpoints allowed)."""
    return kernel.partial_mass(a, b)


def first_moment(kernel: Kernel) -> float:
    return kernel.first_moment()


@dataclass(frozen=True)
class LinearTerm:
    """One term of a multi-kernel linearisation at the trivial state.

    ``outer_weight`` is the partial derivative of the outer nonlinearity,
    ``inner_slope`` the derivative of the inner birth term at zero.
    """

    outer_weight: float
    inner_slope: float
    kernel: Kernel

    def __post_init__(self):
        if self.outer_weight < 0 or self.inner_slope < 0:
            raise ValueError("linear term weights must be nonnegative")

    @property
    def product(self) -> float:
        return self.outer_weight * self.inner_slope


def aggregate_linearization(terms: Sequence[LinearTerm]):
    """Collapse several linear terms into ``(p, K)``.

    ``p`` is the sum of the products ``outer_weight * inner_slope`` and ``K``
    the mixture of member kernels weighted by those products.
    """
    terms = list(terms)
    prods = [t.product for t in terms]
    p = float(sum(prods))
    if not terms or p <= 0:
        raise ValueError("aggregate needs at least one term with positive weight")
    kept = [(w, t.kernel) for w, t in zip(prods, terms) if w > 0]
    if len(kept) == 1:
        return p, kept[0][1]
    return p, Mixture(tuple(w for w, _ in kept), tuple(k for _, k in kept))


def load_tabulated_csv(path) -> Tabulated:
    """Read a two-column ``s,density`` CSV (an optional header row is skipped)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                if rows:
                    raise
                continue  # header
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two (s, density) rows")
    arr = np.asarray(rows)
    return Tabulated(arr[:, 0], arr[:, 1])


_FAMILY_PARAMS = {
    "dirac": {"shift"},
    "gaussian": {"alpha", "shift"},
    "uniform": {"eta", "shift"},
    "tabulated": {"path"},
}


def kernel_from_config(family: str, params: dict) -> Kernel:
    """Build a kernel from ``{family, params}`` as written in config files."""
    family = family.strip().lower()
    if family not in _FAMILY_PARAMS:
        raise ValueError(f"unknown kernel family {family!r}")
    unknown = set(params) - _FAMILY_PARAMS[family]
    if unknown:
        raise ValueError(f"unknown {family} kernel parameter(s): {sorted(unknown)}")
    shift = float(params.get("shift", 0.0))
    if family == "dirac":
        return Dirac(shift)
    if family == "gaussian":
        return Gaussian(float(params["alpha"]), shift)
    if family == "uniform":
        return Uniform(float(params["eta"]), shift)
    return load_tabulated_csv(params["path"])
