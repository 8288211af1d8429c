"""Travelling waves for delayed reaction-diffusion equations with non-local birth.

    u_t = u_xx - u + int K(x - y) g(u(t - h, y)) dy

Critical speeds come from :mod:`wavecrest.spectral`, profiles from
:mod:`wavecrest.waveform`, and sufficient conditions for wavefronts from
:mod:`wavecrest.criteria`.
"""

__version__ = "0.1.0"

from .birth import Custom, Nicholson, TruncatedLinear, hypothesis_report, landmarks
from .criteria import (
    D_func,
    optimal_sstar,
    plateau_bound,
    reduce_advection,
    speed_classification,
    speed_from_eps,
    wavefront_certificate,
    xi,
)
from .kernels import Dirac, Gaussian, Mixture, Tabulated, Uniform
from .problem import ProblemSpec
from .spectral import (
    CharFunction,
    critical_eps0,
    critical_eps1,
    kappa_char_negative_root,
    positive_roots,
    psi,
    speeds,
)
from .waveform import Profile, SolverConfig, analyze_wave, apply_A, apply_G, residual, solve_profile

__all__ = [
    "Custom", "Nicholson", "TruncatedLinear", "hypothesis_report", "landmarks",
    "D_func", "optimal_sstar", "plateau_bound", "reduce_advection", "speed_classification",
    "speed_from_eps", "wavefront_certificate", "xi",
    "Dirac", "Gaussian", "Mixture", "Tabulated", "Uniform",
    "ProblemSpec",
    "CharFunction", "critical_eps0", "critical_eps1", "kappa_char_negative_root",
    "positive_roots", "psi", "speeds",
    "Profile", "SolverConfig", "analyze_wave", "apply_A", "apply_G", "residual", "solve_profile",
]
