"""Sufficient conditions for wavefronts, speed classes and advection scaling.

The certificate combines a negative Schwarzian, the two-step bound
``g(g(zeta2)) >= kappa`` and a damping condition on ``g'(kappa)`` that
weighs the derivative by ``1 - D`` with

    D(s)  = min{ mass(K, [-h/sqrt(eps), -(s+h)/sqrt(eps)]), xi(-s) },
    xi(u) = (mu - lam) / (mu e^{-lam u} - lam e^{-mu u}),

``lam < 0 < mu`` being the roots of ``eps z^2 - z - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .birth import (
    BirthFunction,
    hypothesis_report,
    interval_map_iterate,
    landmarks,
    schwarzian,
)
from .errors import DomainError
from .kernels import Gaussian
from .problem import ProblemSpec
from .spectral import kappa_char_negative_root, speeds
from .waveform import lambda_mu

__all__ = [
    "ProblemSpec",
    "CertificateReport",
    "SPEED_CLASSES",
    "xi",
    "D_func",
    "optimal_sstar",
    "wavefront_certificate",
    "speed_classification",
    "reduce_advection",
    "speed_from_eps",
    "plateau_bound",
]

# ordered by increasing speed
SPEED_CLASSES = ("below_c_star", "above_c_sharp_only", "between", "admissible")


def xi(eps: float, u: float) -> float:
    """Weight in (0, 1]; equals 1 at ``u = 0`` and decreases to 0."""
    if u < 0:
        raise ValueError(f"xi needs u >= 0, got {u}")
    if math.isinf(u):
        return 0.0
    lam, mu, _ = lambda_mu(eps)
    a = -lam
    # divide through by mu e^{a u} so nothing overflows
    return (mu + a) / mu * math.exp(-a * u) / (1.0 + (a / mu) * math.exp(-(mu + a) * u))


def _mass_term(spec: ProblemSpec, s: float) -> float:
    r = math.sqrt(spec.eps)
    a = -spec.h / r
    b = math.inf if math.isinf(s) else -(s + spec.h) / r
    return spec.kernel.partial_mass(a, b) if b > a else 0.0


def D_func(spec: ProblemSpec, s: float) -> float:
    if s > 0:
        raise ValueError(f"D_func needs s <= 0, got {s}")
    return min(_mass_term(spec, s), xi(spec.eps, -s))


def optimal_sstar(spec: ProblemSpec) -> tuple[float, float]:
    """Crossing point ``s'`` of the mass term and ``xi(-s)``, with ``D(s')``.

    The mass term grows and ``xi(-s)`` shrinks as ``s`` decreases, so the
    minimum of the two peaks where they cross.  Jumps (point masses) are
    handled by returning the better bracket end.
    """
    diff = lambda s: _mass_term(spec, s) - xi(spec.eps, -s)  # noqa: E731
    limit = 1e6 / math.sqrt(spec.eps)
    lo = -1.0
    # xi underflows far out, so also insist on some kernel mass
    while diff(lo) < 0 or _mass_term(spec, lo) == 0.0:
        if -lo >= limit:
            return -math.inf, 0.0
        lo = max(2 * lo, -limit)
    hi = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if diff(mid) >= 0:
            lo = mid
        else:
            hi = mid
    cands = [(D_func(spec, x), x) for x in (lo, hi)]
    best_d, best_s = max(cands)
    return best_s, best_d


@dataclass
class CertificateReport:
    speed_class: str
    semi_wavefront_exists: bool
    wavefront_certified: bool
    oscillatory_predicted: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "speed_class": self.speed_class,
            "semi_wavefront_exists": self.semi_wavefront_exists,
            "wavefront_certified": self.wavefront_certified,
            "oscillatory_predicted": self.oscillatory_predicted,
            "details": self.details,
        }


def _cond(holds, margin, **inputs) -> dict:
    return {"holds": bool(holds), "margin": margin, "inputs": inputs}


def speed_classification(spec: ProblemSpec, report=None) -> dict:
    """Where ``spec.c`` sits relative to the critical speeds."""
    if report is None:
        report = speeds(spec.h, spec.kernel, spec.g, spec.q)
    c = spec.c
    rel = 1e-12
    if c >= report.c_tilde_star * (1 - rel):
        cls = "admissible"
    elif c >= report.c_star * (1 - rel):
        cls = "between"
    elif c > report.c_sharp:
        cls = "above_c_sharp_only"
    else:
        cls = "below_c_star"
    return {
        "speed_class": cls,
        "c": c,
        "c_star": report.c_star,
        "c_sharp": report.c_sharp,
        "c_tilde_star": report.c_tilde_star,
        "no_semi_wavefront": c < report.c_star * (1 - rel),
        "persistent": c > report.c_sharp,
        "semi_wavefront_exists": cls == "admissible",
    }


def _mainex2_value(g_kappa: float, h: float, eps: float, kernel) -> tuple[float, float]:
    mass = kernel.partial_mass(-h / math.sqrt(eps), 0.0) if h > 0 else 0.0
    m = min(math.exp(-h), mass)
    return (1.0 - m) * g_kappa, m


def _schwarzian_check(g: BirthFunction, lm, n: int = 2001):
    a, b = lm.zeta1, lm.zeta2
    grid = np.linspace(a, b, n)
    worst = -math.inf
    for s in grid:
        if lm.s_M is not None and abs(s - lm.s_M) < 1e-6 * max(1.0, lm.s_M):
            continue
        try:
            worst = max(worst, schwarzian(g, float(s)))
        except DomainError:
            continue
    return worst < 0, worst


def wavefront_certificate(spec: ProblemSpec, report=None) -> CertificateReport:
    """Condition-by-condition check that semi-wavefronts at ``spec.c`` are wavefronts."""
    g, eps, h = spec.g, spec.eps, spec.h
    if report is None:
        report = speeds(h, spec.kernel, g, spec.q)
    cls = speed_classification(spec, report)
    hyp = hypothesis_report(g)
    lm = landmarks(g)
    kappa, gk = lm.kappa, lm.slope_kappa
    details = {"H": _cond(hyp.H, None)}

    ok_i, worst = _schwarzian_check(g, lm)
    details["schwarzian_negative"] = _cond(ok_i, -worst, zeta1=lm.zeta1, zeta2=lm.zeta2, max_Sg=worst)

    g2 = float(g(g(lm.zeta2)))
    details["second_iterate"] = _cond(g2 >= kappa, g2 - kappa, g2_zeta2=g2, kappa=kappa)

    s_star, d_star = optimal_sstar(spec)
    dc = (1.0 - d_star) * gk
    details["Dc"] = _cond(dc > -1.0, dc + 1.0, s_star=s_star, D=d_star, g_prime_kappa=gk, value=dc)

    m2, mass_min = _mainex2_value(gk, h, eps, spec.kernel)
    details["mainex2"] = _cond(m2 >= -1.0, m2 + 1.0, value=m2, min_term=mass_min, eps=eps)

    # best free parameter for the simplified condition, eps <= eps0 tilde
    eps_cap = report.eps0_tilde
    grid = np.geomspace(1e-4, 1e4, 161)
    if math.isfinite(eps_cap):
        grid = np.append(grid[grid < eps_cap], eps_cap)
    best_eps, best_val = None, -math.inf
    for e in grid:
        val, _ = _mainex2_value(gk, h, float(e), spec.kernel)
        if val >= -1.0 and (best_eps is None or e > best_eps):
            best_eps = float(e)
        best_val = max(best_val, val)
    floor = None if best_eps is None else max(report.c_tilde_star, 1.0 / math.sqrt(best_eps))
    details["mainex2_search"] = _cond(
        best_eps is not None, best_val + 1.0, best_eps=best_eps, speed_floor=floor
    )

    f = lambda s: kappa * d_star + (1.0 - d_star) * g(s)  # noqa: E731
    it = interval_map_iterate(f, (lm.zeta1, lm.zeta2), maximizer=lm.s_M, kappa=kappa)
    width = it.final[1] - it.final[0]
    details["interval_map"] = _cond(it.converged, -width, iterations=len(it.history), reason=it.reason)

    cond_iii = details["Dc"]["holds"] or details["mainex2"]["holds"]
    certified = bool(
        cls["semi_wavefront_exists"]
        and hyp.H
        and ok_i
        and details["second_iterate"]["holds"]
        and (cond_iii or it.converged)
    )

    osc = False
    if gk < 0:
        scan = kappa_char_negative_root(spec.c, h, gk, spec.kernel)
        osc = not scan["has_root"]
        details["tail_oscillation"] = _cond(
            osc, -scan["max_value"], witness=scan["witness"], z_low=scan["z_low"]
        )
    details["speeds"] = cls
    return CertificateReport(
        speed_class=cls["speed_class"],
        semi_wavefront_exists=cls["semi_wavefront_exists"],
        wavefront_certified=certified,
        oscillatory_predicted=osc,
        details=details,
    )


def reduce_advection(D_m: float, B: float, h: float, c: float, g: BirthFunction) -> ProblemSpec:
    """Map the advective model with diffusivity ``D_m`` and drift ``B`` to scaled form."""
    if not D_m > 0:
        raise ValueError(f"D_m must be positive, got {D_m}")
    if not c > B:
        raise ValueError(f"need c > B, got c={c}, B={B}")
    eps = D_m / (c - B) ** 2
    return ProblemSpec(Gaussian(alpha=1.0 / D_m), g, h, eps=eps, speed_offset=B)


def speed_from_eps(D_m: float, B: float, eps: float) -> float:
    if not (D_m > 0 and eps > 0):
        raise ValueError("D_m and eps must be positive")
    return B + math.sqrt(D_m / eps)


def _sup_g(g: BirthFunction, lm) -> float:
    if lm.s_M is not None:
        return lm.zeta2
    s = np.geomspace(1e-6, 1e6, 4001)
    return float(np.max(g(s)))


def plateau_bound(spec: ProblemSpec, alpha: float) -> float:
    """Half-width beyond which no wavefront stays above ``alpha`` on a plateau.

    ``inf`` when ``g(alpha) >= kappa`` (no contradiction is available).
    """
    lm = landmarks(spec.g)
    if not alpha > lm.kappa:
        raise ValueError(f"alpha must exceed kappa={lm.kappa}, got {alpha}")
    ga = float(spec.g(alpha))
    sup_g = _sup_g(spec.g, lm)
    if ga >= lm.kappa:
        return math.inf
    if sup_g <= lm.kappa:
        return 0.0
    target = (sup_g - lm.kappa) / (sup_g - ga)
    r = math.sqrt(spec.eps)
    h = spec.h

    def mass(q):
        return spec.kernel.partial_mass(-(q + h) / r, (q - h) / r)

    lo, hi = 0.0, max(1.0, h)
    while mass(hi) < target:
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mass(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi
