"""Wave profiles as fixed points of the variation-of-constants operator.

A profile ``phi`` solves

    eps phi'' - phi' - q phi + (G phi)(t - h) = 0,
    (G phi)(s) = int K(w) g(phi(s - sqrt(eps) w)) dw,

which is equivalent to ``phi = A phi`` with

    (A phi)(t) = 1/eps' [ int_{-inf}^t e^{lam (t-s)} F(s) ds
                        + int_t^{inf} e^{mu (t-s)} F(s) ds ],

``F(s) = (G phi)(s - h)``, ``lam < 0 < mu`` the roots of ``eps z^2 - z - q``
and ``eps' = eps (mu - lam)``.  Both integrals are evaluated in O(N) with
exponential recurrences; the increments integrate a local cubic
interpolant of ``F`` exactly against the exponential weight.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter

from .birth import interval_image, landmarks as birth_landmarks
from .errors import DomainError
from .kernels import Dirac, Gaussian, Kernel
from .problem import ProblemSpec
from .spectral import CharFunction, minimize_psi, positive_roots

__all__ = [
    "Profile",
    "SolverConfig",
    "SolveResult",
    "lambda_mu",
    "apply_G",
    "apply_A",
    "solve_profile",
    "residual",
    "analyze_wave",
    "WaveAnalysis",
]

log = logging.getLogger(__name__)


def lambda_mu(eps: float, q: float = 1.0) -> tuple[float, float, float]:
    """Roots ``lam < 0 < mu`` of ``eps z^2 - z - q`` and ``eps' = eps (mu - lam)``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    root = math.sqrt(1.0 + 4.0 * eps * q)
    lam = -2.0 * q / (1.0 + root)
    mu = (1.0 + root) / (2.0 * eps)
    return lam, mu, root


@dataclass(frozen=True)
class Profile:
    """Samples of ``phi`` on a uniform grid plus exponential tail extensions.

    For ``t < t[0]`` the profile is ``values[0] exp(left_rate (t - t[0]))``
    and for ``t > t[-1]`` it is ``values[-1] exp(right_rate (t - t[-1]))``.
    """

    t: np.ndarray
    values: np.ndarray
    eps: float
    left_rate: float = 0.0
    right_rate: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 5:
            raise ValueError("profile needs matching 1-d grid and values with at least 5 points")
        steps = np.diff(t)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0] * t.size:
            raise ValueError("profile grid must be uniform and increasing")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def on_grid(cls, t0, t1, dt, func, eps, left_rate=0.0, right_rate=0.0):
        n = int(round((t1 - t0) / dt))
        t = t0 + dt * np.arange(n + 1)
        return cls(t, np.asarray(func(t), dtype=float) * np.ones_like(t), eps, left_rate, right_rate)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def padded(self, left: int, right: int) -> np.ndarray:
        """Values on the grid extended by ``left``/``right`` ghost points."""
        dt = self.dt
        lpad = self.values[0] * np.exp(self.left_rate * dt * np.arange(-left, 0))
        rpad = self.values[-1] * np.exp(self.right_rate * dt * np.arange(1, right + 1))
        return np.concatenate([lpad, self.values, rpad])

    def at(self, x) -> np.ndarray:
        """Cubic Lagrange interpolation inside the grid, extensions outside."""
        x = np.asarray(x, dtype=float)
        t0, dt, n = self.t[0], self.dt, self.t.size
        pos = (x - t0) / dt
        out = np.empty_like(pos)
        lo = pos < 0
        hi = pos > n - 1
        mid = ~(lo | hi)
        out[lo] = self.values[0] * np.exp(self.left_rate * (x[lo] - t0))
        out[hi] = self.values[-1] * np.exp(self.right_rate * (x[hi] - self.t[-1]))
        if np.any(mid):
            ext = self.padded(2, 2)
            p = pos[mid]
            k = np.clip(np.floor(p).astype(int), 0, n - 2)
            out[mid] = _cubic(ext, k + 2, p - k)
        return np.maximum(out, 0.0)

    def shifted(self, s: float) -> "Profile":
        """Profile ``t -> phi(t + s)`` resampled on the same grid."""
        return replace(self, values=self.at(self.t + s))

    def with_values(self, values) -> "Profile":
        return replace(self, values=np.asarray(values, dtype=float))


def _cubic(ext, k, theta):
    """Cubic through ``ext[k-1..k+2]`` at fractional position ``k + theta``."""
    a, b, c, d = ext[k - 1], ext[k], ext[k + 1], ext[k + 2]
    th = theta
    return (
        -th * (th - 1) * (th - 2) / 6 * a
        + (th + 1) * (th - 1) * (th - 2) / 2 * b
        - (th + 1) * th * (th - 2) / 2 * c
        + (th + 1) * th * (th - 1) / 6 * d
    )


def _kernel_nodes(kernel: Kernel, eps: float, dt: float):
    """Quadrature nodes in profile time units and their weights."""
    r = math.sqrt(eps)
    if isinstance(kernel, (Dirac, Gaussian)):
        s, w = kernel.quadrature()
    else:
        # sub-step resolution on the scaled axis
        s, w = kernel.quadrature(spacing=0.5 * dt / max(r, 1e-12))
    return r * np.asarray(s, dtype=float), np.asarray(w, dtype=float)


def apply_G(phi: Profile, g, kernel: Kernel, delay: float = 0.0) -> np.ndarray:
    """``(G phi)(t_i - delay)`` on the grid of ``phi``."""
    offsets, weights = _kernel_nodes(kernel, phi.eps, phi.dt)
    shifts = (delay + offsets) / phi.dt
    base = np.floor(shifts).astype(int)
    frac = shifts - base
    n = phi.t.size
    # a grid shift of m reads values[i - m]; cubic needs one more on each side
    left = max(0, int(base.max()) + 2)
    right = max(0, -int(base.min()) + 2)
    if left + right > 50_000_000:
        raise DomainError("kernel nodes reach too far beyond the profile window")
    ext = phi.padded(left, right)
    idx = np.arange(n) + left
    out = np.zeros(n)
    for m, th, w in zip(base, frac, weights):
        # phi(t_i - (m + th) dt) lies between grid points i-m-1 and i-m
        if th < 1e-12:
            vals = ext[idx - m]
        else:
            vals = _cubic(ext, idx - m - 1, 1.0 - th)
        out += w * g(np.maximum(vals, 0.0))
    return out


_CUBIC_NODES = np.array([-1.0, 0.0, 1.0, 2.0])


def _lagrange_basis(x):
    n = _CUBIC_NODES
    cols = []
    for k in range(4):
        term = np.ones_like(x)
        for j in range(4):
            if j != k:
                term = term * (x - n[j]) / (n[k] - n[j])
        cols.append(term)
    return np.stack(cols, axis=-1)


def _cell_weights(rate: float, dt: float, reverse: bool) -> np.ndarray:
    """``dt * int_0^1 exp(rate dt (1-x) or rate dt x) L_k(x) dx`` for the 4 cubic nodes."""
    m = max(32, int(4 * abs(rate * dt)) + 32)
    x, w = np.polynomial.legendre.leggauss(m)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    expo = rate * dt * (x if reverse else (1.0 - x))
    return dt * (w * np.exp(expo)) @ _lagrange_basis(x)


def _recurrence(decay: float, incr: np.ndarray, start: float) -> np.ndarray:
    """``y_0 = start, y_i = decay * y_{i-1} + incr_i``."""
    y = lfilter([1.0], [1.0, -decay], incr, zi=[decay * start])[0]
    return np.concatenate([[start], y])


def apply_A(phi: Profile, g, kernel: Kernel, h: float, q: float = 1.0, F=None) -> Profile:
    """One application of the integral operator; ``F`` may be precomputed."""
    lam, mu, root = lambda_mu(phi.eps, q)
    eps_p = phi.eps * (mu - lam)
    dt = phi.dt
    if F is None:
        F = apply_G(phi, g, kernel, delay=h)
    rho_l, rho_r = phi.left_rate, phi.right_rate
    if not rho_l > lam or not rho_r < mu:
        raise DomainError("tail extension rates must lie strictly between lam and mu")
    # F outside the window follows the same exponential tails as phi
    Fx = np.concatenate([[F[0] * math.exp(-rho_l * dt)], F, [F[-1] * math.exp(rho_r * dt)]])
    # forward cell (t_{i-1}, t_i) uses F at i-2..i+1
    wf = _cell_weights(lam, dt, reverse=False)
    inc_f = wf[0] * Fx[:-3] + wf[1] * Fx[1:-2] + wf[2] * Fx[2:-1] + wf[3] * Fx[3:]
    fwd = _recurrence(math.exp(lam * dt), inc_f, F[0] / (rho_l - lam))
    # backward cell (t_i, t_{i+1}) uses F at i-1..i+2
    wb = _cell_weights(-mu, dt, reverse=True)
    inc_b = wb[0] * Fx[:-3] + wb[1] * Fx[1:-2] + wb[2] * Fx[2:-1] + wb[3] * Fx[3:]
    bwd = _recurrence(math.exp(-mu * dt), inc_b[::-1], F[-1] / (mu - rho_r))[::-1]
    out = (fwd + bwd) / eps_p
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite values in operator A; check tail extensions")
    return phi.with_values(out)


def residual(phi: Profile, g, kernel: Kernel, h: float, q: float = 1.0, order: int = 4) -> tuple[float, float]:
    """Max interior defect of the profile equation and where it occurs.

    Derivatives use central differences of the given ``order`` (2 or 4);
    the fourth-order stencil keeps the differencing error below the
    accuracy of the computed fixed point on steep fronts.
    """
    v, dt = phi.values, phi.dt
    F = apply_G(phi, g, kernel, delay=h)
    if order == 2:
        d2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / dt**2
        d1 = (v[2:] - v[:-2]) / (2 * dt)
        k = 1
    elif order == 4:
        d2 = (-v[4:] + 16 * v[3:-1] - 30 * v[2:-2] + 16 * v[1:-3] - v[:-4]) / (12 * dt**2)
        d1 = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * dt)
        k = 2
    else:
        raise ValueError(f"order must be 2 or 4, got {order}")
    r = np.abs(phi.eps * d2 - d1 - q * v[k:-k] + F[k:-k])
    i = int(np.argmax(r))
    return float(r[i]), float(phi.t[i + k])


@dataclass(frozen=True)
class SolverConfig:
    t_left: Optional[float] = None
    t_right: Optional[float] = None
    dt: Optional[float] = None
    tol: float = 1e-8
    max_iter: int = 10_000
    delta: Optional[float] = None
    damping: float = 1.0

    def resolved(self, problem: ProblemSpec) -> "SolverConfig":
        """Fill defaults and check window and step against the problem scales."""
        scale = math.sqrt(problem.eps) * problem.kernel.scale()
        floor = 10.0 * max(1.0, problem.h, scale)
        dt_max = min(0.01, problem.h / 10) if problem.h > 0 else 0.01
        t_left = self.t_left
        if t_left is None:
            # the faster tail mode must have died out at the left edge,
            # otherwise the pure lambda1 extension makes the front creep
            t_left = 2 * floor
            roots = positive_roots(
                CharFunction(problem.eps, problem.h, float(problem.g.slope0), problem.q, problem.kernel)
            )
            if roots is not None and roots[1] > roots[0]:
                need = 1.25 * math.log(1.0 / self.tol) / (roots[1] - roots[0])
                t_left = min(max(t_left, need), 50 * floor)
        cfg = replace(
            self,
            t_left=t_left,
            t_right=self.t_right if self.t_right is not None else 5 * floor,
            dt=self.dt if self.dt is not None else dt_max,
        )
        if cfg.t_left < floor or cfg.t_right < floor:
            raise ValueError(f"window half-widths must be at least {floor:g}")
        if cfg.dt > dt_max + 1e-15:
            raise ValueError(f"grid step must not exceed {dt_max:g}")
        if not 0 < cfg.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not cfg.tol > 0 or cfg.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")
        return cfg


@dataclass
class SolveResult:
    profile: Profile
    iterations: int
    converged: bool
    residual: float
    residual_at: float
    reason: str
    lambda1: Optional[float]
    below_c_star: bool
    damping: float
    history: list = field(default_factory=list)

    def diagnostics(self) -> dict:
        lam, mu, _ = lambda_mu(self.profile.eps)
        return {
            "eps": self.profile.eps,
            "lam": lam,
            "mu": mu,
            "lambda1": self.lambda1,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "residual_at": self.residual_at,
            "reason": self.reason,
            "below_c_star": self.below_c_star,
            "damping": self.damping,
        }


def _pin_shift(phi: Profile, target: float) -> Optional[float]:
    """Abscissa of the first upward crossing of ``target``."""
    v, t = phi.values, phi.t
    above = np.nonzero(v >= target)[0]
    if above.size == 0:
        return None
    i = int(above[0])
    if i == 0:
        if phi.left_rate > 0 and v[0] > 0:
            return float(t[0] + math.log(target / v[0]) / phi.left_rate)
        return None
    f = lambda x: float(phi.at(np.array([x]))[0]) - target  # noqa: E731
    a, b = t[i - 1], t[i]
    if f(a) > 0 or f(b) < 0:
        return float(a + (target - v[i - 1]) / (v[i] - v[i - 1]) * (b - a))
    return brentq(f, a, b, xtol=1e-14)


def _steady_drift(shifts, tol, window=100) -> bool:
    """The pinning translation has settled to a nonzero constant."""
    if len(shifts) < 2 * window:
        return False
    recent = np.asarray(shifts[-window:])
    mean = float(np.mean(recent))
    return abs(mean) > 1e3 * tol and float(np.ptp(recent)) < 1e-3 * abs(mean)


def solve_profile(problem: ProblemSpec, config: SolverConfig | None = None) -> SolveResult:
    """Iterate ``phi <- (1 - theta) phi + theta A phi`` with phase pinning.

    Convergence failures are reported in the result, never raised.
    """
    if not problem.has_speed:
        raise ValueError("solve_profile needs a speed (c or eps)")
    cfg = (config or SolverConfig()).resolved(problem)
    g, kernel, h, q, eps = problem.g, problem.kernel, problem.h, problem.q, problem.eps
    lm = birth_landmarks(g)
    target = 0.5 * lm.zeta1
    delta = cfg.delta if cfg.delta is not None else lm.zeta1 / 10
    p = float(g.slope0)
    cf = CharFunction(eps, h, p, q, kernel)
    roots = positive_roots(cf)
    below = roots is None
    if below:
        warnings.warn("speed below the minimal speed: no positive characteristic root", RuntimeWarning)
        rate = max(minimize_psi(cf, 1)[0], 1e-3)
    else:
        rate = roots[0]
    lam, mu, _ = lambda_mu(eps, q)
    phi = Profile.on_grid(
        -cfg.t_left, cfg.t_right, cfg.dt,
        lambda t: np.minimum(delta * np.exp(rate * t), lm.zeta2),
        eps, left_rate=rate,
    )
    theta = cfg.damping
    history, shifts = [], []
    converged, reason, it = False, "max_iter reached", 0
    for it in range(1, cfg.max_iter + 1):
        new = apply_A(phi, g, kernel, h, q)
        vals = (1 - theta) * phi.values + theta * new.values
        cand = phi.with_values(vals)
        if not np.all(np.isfinite(vals)) or vals.max() > 2 * lm.zeta2 or vals.min() < -1e-12:
            reason = "iterate left [0, 2 zeta2]"
            break
        shift = _pin_shift(cand, target)
        if shift is None:
            reason = "profile never reaches the pinning level"
            phi = cand
            break
        raw = float(np.max(np.abs(vals - phi.values)))
        cand = cand.shifted(shift)
        change = max(raw, float(np.max(np.abs(cand.values - phi.values))))
        history.append(change)
        shifts.append(shift)
        phi = cand
        if change < cfg.tol:
            converged, reason = True, "converged"
            break
        if _steady_drift(shifts, cfg.tol):
            reason = "profile drifts at a steady rate: no fixed point at this speed"
            break
    res, where = residual(phi, g, kernel, h, q)
    log.debug("solve_profile: %s after %d iterations, residual %.3g", reason, it, res)
    return SolveResult(
        profile=phi,
        iterations=it,
        converged=converged,
        residual=res,
        residual_at=where,
        reason=reason,
        lambda1=None if below else rate,
        below_c_star=below,
        damping=theta,
        history=history,
    )


@dataclass
class WaveAnalysis:
    monotone: bool
    crossings: int
    left_rate: float
    range_inclusion: bool
    tail_inclusion: bool
    liminf_estimate: float
    limsup_estimate: float
    degenerate: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _count_crossings(x: np.ndarray, floor: float) -> int:
    signs = np.sign(x[np.abs(x) > floor])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def analyze_wave(phi: Profile, lm, g=None, slack: float = 1e-3) -> WaveAnalysis:
    """Shape diagnostics of a computed profile.

    ``lm`` are the landmarks of ``g``; the range checks need ``g`` itself.
    """
    v, t = phi.values, phi.t
    n = v.size
    degenerate = float(np.ptp(v)) < 1e-12
    monotone = bool(np.all(np.diff(v) >= -1e-10))
    # right of the pinning point (the grid midpoint if the pin is off-window)
    split = 0.0 if t[0] < 0.0 < t[-1] else 0.5 * (t[0] + t[-1])
    right = v[t >= split]
    crossings = _count_crossings(right - lm.kappa, 1e-7 * max(1.0, lm.kappa))

    # far left tail, where the slowest exponential dominates
    mask = (v > 0) & (v < 0.05 * lm.zeta1) & (t <= t[0] + 0.1 * (t[-1] - t[0]))
    if np.count_nonzero(mask) >= 5:
        left_rate = float(np.polyfit(t[mask], np.log(v[mask]), 1)[0])
    else:
        left_rate = float("nan")

    tail = v[-max(n // 4, 1):]
    lo_tail, hi_tail = float(tail.min()), float(tail.max())
    range_ok = tail_ok = True
    if g is not None:
        a, b = float(v.min()), float(v.max())
        ia, ib = interval_image(g, a, b, lm.s_M)
        range_ok = ia - slack <= a and b <= ib + slack
        ta, tb = interval_image(g, lo_tail, hi_tail, lm.s_M)
        tail_ok = ta - slack <= lo_tail and hi_tail <= tb + slack
    return WaveAnalysis(
        monotone=monotone,
        crossings=crossings,
        left_rate=left_rate,
        range_inclusion=bool(range_ok),
        tail_inclusion=bool(tail_ok),
        liminf_estimate=lo_tail,
        limsup_estimate=hi_tail,
        degenerate=degenerate,
    )
