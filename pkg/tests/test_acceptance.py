"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run under pytest, or directly with ``python3 tests/test_acceptance.py``.
"""

import csv
import json
import math
import os
import sys
import tempfile
import time
import warnings

import numpy as np
from hypothesis import given, settings, strategies as st

from wavecrest.birth import Custom, Nicholson, landmarks
from wavecrest.cli import main as cli_main
from wavecrest.kernels import Dirac, Gaussian, Uniform
from wavecrest.problem import ProblemSpec
from wavecrest.spectral import (
    CharFunction,
    critical_eps0,
    critical_eps1,
    kappa_char_negative_root,
    negative_roots,
    psi,
    speeds,
)
from wavecrest.waveform import Profile, SolverConfig, analyze_wave, apply_A, solve_profile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
LN9 = math.log(9.0)


class Check:
    def __init__(self, number, budget=None):
        self.number, self.budget = number, budget
        self.failures, self.notes = [], []

    def expect(self, ok, message):
        if not ok:
            self.failures.append(message)
        return ok

    def note(self, message):
        self.notes.append(message)

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is not None:
            self.failures.append(f"{exc[0].__name__}: {exc[1]}")
        if self.budget is not None:
            self.expect(self.elapsed < self.budget, f"runtime {self.elapsed:.3g}s over {self.budget}s")
        return True

    @property
    def passed(self):
        return not self.failures

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        detail = "; ".join(self.failures or self.notes)
        return f"criterion {self.number:>2}: {status}  ({self.elapsed:.3f}s)  {detail}"


def criterion_1():
    with Check(1, budget=1.0) as c:
        e0 = critical_eps0(1.0, 9.0, 1.0, Gaussian(0.2))
        speed = math.sqrt(5.0 / e0)
        c.expect(0.3715 <= e0 <= 0.3735, f"eps0={e0}")
        c.expect(3.65 <= speed <= 3.68, f"minimal speed {speed}")
        c.note(f"eps0={e0:.6f}, sqrt(5/eps0)={speed:.5f}")
    return c


def criterion_2():
    with Check(2, budget=0.1) as c:
        g = Nicholson(9.0)
        lm = landmarks(g)
        g2 = float(g(g(lm.zeta2)))
        c.expect(abs(lm.kappa - LN9) < 1e-9, f"kappa={lm.kappa}")
        c.expect(abs(lm.zeta2 - 9 / math.e) < 1e-9, f"zeta2={lm.zeta2}")
        c.expect(3.298 <= g2 <= 3.300, f"g2(zeta2)={g2}")
        c.note(f"kappa={lm.kappa:.10f}, zeta2={lm.zeta2:.10f}, g2={g2:.5f}")
    return c


def criterion_3():
    with Check(3, budget=0.1) as c:
        worst = 0.0
        for p in (2.0, 5.0, 10.0):
            e0 = critical_eps0(0.0, p, 1.0, Dirac())
            # discriminant of eps z^2 - z + (p - q) vanishes at eps = 1/(4(p - q))
            err = max(abs(e0 - 1 / (4 * (p - 1))), abs(1 / math.sqrt(e0) - 2 * math.sqrt(p - 1)))
            worst = max(worst, err)
            c.expect(err < 1e-8, f"p={p}: error {err:.2e}")
        c.note(f"max error {worst:.1e}")
    return c


def criterion_4():
    with Check(4, budget=1.0) as c:
        g = Nicholson(9.0)
        for kernel in (Dirac(), Gaussian(0.2), Uniform(1.5)):
            rep = speeds(1.0, kernel, g)
            c.expect(rep.eps1 == math.inf and rep.c_sharp == 0.0, f"{kernel.family}: eps1={rep.eps1}")
        kernel = Dirac(-5.0)
        e1 = critical_eps1(0.0, 2.0, 1.0, kernel)
        c.expect(math.isfinite(e1), f"eps1={e1}")
        if math.isfinite(e1):
            cf = CharFunction(1.01 * e1, 0.0, 2.0, 1.0, kernel)
            roots = negative_roots(cf)
            c.expect(roots is not None and roots[0] < roots[1] < 0, f"negative roots {roots}")
            if roots is not None:
                vals = [abs(psi(cf, z)) for z in roots]
                c.expect(max(vals) < 1e-9, f"|psi| at roots {vals}")
                c.note(f"eps1={e1:.6f}, roots={roots[0]:.6f},{roots[1]:.6f}, |psi|<={max(vals):.1e}")
    return c


def criterion_5():
    seen = []
    shifted = st.one_of(
        st.builds(Dirac, st.floats(-3.0, 0.0)),
        st.builds(Gaussian, st.floats(0.05, 1.0), st.floats(-3.0, 0.0)),
        st.builds(Uniform, st.floats(0.1, 2.0), st.floats(-3.0, 0.0)),
    )

    @settings(max_examples=20, deadline=None, database=None, derandomize=True)
    @given(shifted, st.floats(0.0, 3.0), st.floats(1.5, 20.0))
    def prop(kernel, h, p):
        m1 = kernel.first_moment()
        assert m1 <= 0
        c_star = 1 / math.sqrt(critical_eps0(h, p, 1.0, kernel))
        bound = abs(m1) / (h + 1 / p)
        seen.append(c_star - bound)
        assert c_star > bound, (kernel, h, p, c_star, bound)

    with Check(5, budget=10.0) as c:
        prop()
        c.expect(len(seen) >= 20, f"only {len(seen)} kernels tested")
        c.note(f"{len(seen)} kernels, min margin c*-bound = {min(seen):.3g}")
    return c


def criterion_6():
    with Check(6, budget=30.0) as c:
        spec = ProblemSpec(Dirac(), Nicholson(2.0), 1.0)
        c_star = speeds(1.0, spec.kernel, spec.g).c_star
        spec = spec.with_speed(1.05 * c_star)
        res = solve_profile(spec)
        wave = analyze_wave(res.profile, landmarks(spec.g), spec.g)
        inc = np.diff(res.profile.values)
        right = res.profile.values[-1]
        c.expect(res.converged, res.reason)
        c.expect(res.residual < 1e-4, f"residual {res.residual:.2e}")
        c.expect(inc.min() >= -1e-10, f"negative increment {inc.min():.2e}")
        c.expect(abs(right - math.log(2)) < 1e-3, f"right end {right}")
        rel = abs(wave.left_rate - res.lambda1) / res.lambda1
        c.expect(rel < 0.05, f"left rate {wave.left_rate} vs lambda1 {res.lambda1}")
        c.note(f"residual {res.residual:.1e}, |phi(T)-ln2|={abs(right - math.log(2)):.1e}, left-rate error {rel:.2%}")
    return c


def _blowflies(factor):
    spec = ProblemSpec(Gaussian(0.2), Nicholson(9.0), 1.0)
    rep = speeds(1.0, spec.kernel, spec.g)
    return spec.with_speed(factor * rep.c_star), rep


def criterion_7():
    found = []

    @settings(max_examples=3, deadline=None, database=None, derandomize=True)
    @given(st.floats(1.02, 1.2))
    def prop(factor):
        check_speed(factor)

    def check_speed(factor):
        spec, _ = _blowflies(factor)
        lm = landmarks(spec.g)
        scan = kappa_char_negative_root(spec.c, spec.h, lm.slope_kappa, spec.kernel)
        res = solve_profile(spec, SolverConfig(damping=0.5))
        wave = analyze_wave(res.profile, lm, spec.g)
        found.append((factor, scan["has_root"], res.converged, wave.crossings))
        assert not scan["has_root"], f"c={factor}c*: negative root {scan['witness']}"
        assert res.converged, f"c={factor}c*: {res.reason}"
        assert wave.crossings >= 3, f"c={factor}c*: {wave.crossings} crossings"

    with Check(7, budget=60.0) as c:
        check_speed(1.05)
        prop()
        c.note("; ".join(f"{f:.3f}c*: root={r}, crossings={k}" for f, r, _, k in found))
    return c


def criterion_8():
    checked, attempts = [], []

    @settings(max_examples=8, deadline=None, database=None, derandomize=True)
    @given(
        st.sampled_from([2.0, 5.0, 9.0, 12.0]),
        st.sampled_from(["dirac", "gaussian"]),
        st.floats(0.5, 2.0),
        st.floats(1.03, 1.5),
    )
    def prop(p, family, h, factor):
        kernel = Dirac() if family == "dirac" else Gaussian(0.2)
        spec = ProblemSpec(kernel, Nicholson(p), h)
        rep = speeds(h, kernel, spec.g)
        spec = spec.with_speed(factor * rep.c_star)
        lm = landmarks(spec.g)
        res = solve_profile(spec, SolverConfig(damping=1.0 if p <= math.e else 0.5, max_iter=4000))
        attempts.append(res.reason)
        if not res.converged:
            return
        wave = analyze_wave(res.profile, lm, spec.g, slack=1e-3)
        checked.append((p, family, round(h, 3), round(factor, 3)))
        assert wave.range_inclusion, (p, family, h, factor)
        if spec.c > rep.c_sharp:
            assert wave.liminf_estimate >= 0.95 * lm.zeta1, (p, family, h, factor, wave.liminf_estimate)

    with Check(8) as c:
        for p in (2.0, 9.0):
            spec = ProblemSpec(Gaussian(0.2), Nicholson(p), 1.0)
            rep = speeds(1.0, spec.kernel, spec.g)
            spec = spec.with_speed(1.05 * rep.c_star)
            res = solve_profile(spec, SolverConfig(damping=0.5))
            lm = landmarks(spec.g)
            wave = analyze_wave(res.profile, lm, spec.g)
            c.expect(res.converged, f"p={p}: {res.reason}")
            c.expect(wave.range_inclusion, f"p={p}: range inclusion")
            c.expect(wave.liminf_estimate >= 0.95 * lm.zeta1, f"p={p}: liminf {wave.liminf_estimate}")
            attempts.append(res.reason)
            checked.append((p, "gaussian", 1.0, 1.05))
        prop()
        c.note(f"{len(checked)} of {len(attempts)} solves converged and were checked")
    return c


def criterion_9():
    with Check(9) as c:
        g = Nicholson(9.0)
        k = LN9
        worst = 0.0
        for kernel in (Dirac(), Gaussian(0.2), Uniform(1.0)):
            for value in (k, 0.0):
                phi = Profile.on_grid(-30, 30, 0.01, lambda t: value, 0.3725)
                err = float(np.max(np.abs(apply_A(phi, g, kernel, 1.0).values - value)))
                worst = max(worst, err)
                c.expect(err < 1e-10, f"{kernel.family}, phi={value}: {err:.2e}")
        tol = SolverConfig().tol
        p, eps, h, delta = 2.0, 0.3, 1.0, 0.05
        linear = Custom(lambda s: p * s, lambda s: p, lambda s: 0.0, lambda s: 0.0)
        lin_err = 0.0
        for kernel in (Dirac(), Gaussian(0.2)):
            lam1 = speeds(h, kernel, Nicholson(p), eps=eps).roots_at_eps[0]
            phi = Profile.on_grid(-40, 10, 0.01, lambda t: delta * np.exp(lam1 * t), eps, lam1, lam1)
            err = float(np.max(np.abs(apply_A(phi, linear, kernel, h).values - phi.values)))
            lin_err = max(lin_err, err)
            c.expect(err < 10 * tol, f"linear {kernel.family}: {err:.2e}")
        c.note(f"|A kappa - kappa|, |A0| <= {worst:.1e}; linear bound error {lin_err:.1e}")
    return c


def criterion_10():
    with Check(10) as c, tempfile.TemporaryDirectory() as tmp:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            code = cli_main(["certify", "--config", os.path.join(ROOT, "configs", "blowflies_advection.ini"),
                             "--out", tmp])
        with open(os.path.join(tmp, "certificate.json")) as fh:
            cert = json.load(fh)
        value = cert["details"]["mainex2"]["inputs"]["value"]
        expected = (1 - math.exp(-1)) * (1 - LN9)
        c.expect(code == 0 and cert["wavefront_certified"], "certificate not issued")
        c.expect(abs(value - expected) < 1e-6, f"mainex2 value {value} vs {expected}")
        c.expect(value >= -1, f"mainex2 value {value} < -1")

        code = cli_main(["sweep", "--config", os.path.join(ROOT, "configs", "blowflies_sweep.ini"), "--out", tmp])
        with open(os.path.join(tmp, "sweep.csv"), newline="") as fh:
            rows = list(csv.DictReader(fh))
        flips = [(float(a["c"]), float(b["c"])) for a, b in zip(rows, rows[1:])
                 if a["speed_class"] != b["speed_class"]]
        threshold = math.sqrt(5.0 / critical_eps0(1.0, 9.0, 1.0, Gaussian(0.2)))
        c.expect(code == 0, f"sweep exit code {code}")
        c.expect(len(flips) == 1, f"classification flips {flips}")
        if flips:
            lo, hi = flips[0]
            c.expect(lo <= threshold < hi, f"flip bracket {flips[0]} misses threshold {threshold}")
            c.note(f"mainex2 value {value:.10f}; class flips in ({lo:.2f}, {hi:.2f}] around {threshold:.4f}")
    return c


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


REPORT = []  # lines shown in the pytest terminal summary


def _report(check):
    REPORT.append((check.number, check.line()))


def test_criterion_1():
    _assert(criterion_1())


def test_criterion_2():
    _assert(criterion_2())


def test_criterion_3():
    _assert(criterion_3())


def test_criterion_4():
    _assert(criterion_4())


def test_criterion_5():
    _assert(criterion_5())


def test_criterion_6():
    _assert(criterion_6())


def test_criterion_7():
    _assert(criterion_7())


def test_criterion_8():
    _assert(criterion_8())


def test_criterion_9():
    _assert(criterion_9())


def test_criterion_10():
    _assert(criterion_10())


def _assert(check):
    _report(check)
    assert check.passed, check.line()


if __name__ == "__main__":
    results = [fn() for fn in CRITERIA]
    for r in results:
        print(r.line())
    sys.exit(0 if all(r.passed for r in results) else 1)
