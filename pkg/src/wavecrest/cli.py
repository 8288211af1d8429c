"""``wavecrest`` command line: speeds, profile, certify, sweep, reduce-advection.

Exit codes: 0 success, 1 usage or config error, 2 negative analysis result
(no convergence, not certified), 3 arithmetic failure inside a computation.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .birth import landmarks
from .config import RunConfig, build_problem, load_config, physical_speed
from .criteria import SPEED_CLASSES, speed_classification, wavefront_certificate
from .errors import ConfigError
from .report import dumps, write_csv, write_json
from .spectral import kappa_char_negative_root, speeds
from .waveform import analyze_wave, solve_profile

log = logging.getLogger("wavecrest")

EXIT_OK, EXIT_USAGE, EXIT_NEGATIVE, EXIT_ARITH = 0, 1, 2, 3


def _speeds_payload(cfg: RunConfig, spec, report) -> dict:
    out = report.as_dict()
    out["kernel"] = spec.kernel.to_config()
    out["birth"] = spec.g.to_config()
    if cfg.advection is not None:
        D_m, B = cfg.advection
        out.update(
            D_m=D_m,
            B=B,
            c_star_physical=physical_speed(cfg, report.c_star),
            c_sharp_physical=physical_speed(cfg, report.c_sharp),
            c_tilde_star_physical=physical_speed(cfg, report.c_tilde_star),
        )
    return out


def _path(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def cmd_speeds(cfg: RunConfig) -> tuple[int, list]:
    spec = cfg.spec()
    report = speeds(spec.h, spec.kernel, spec.g, spec.q, eps=spec.eps)
    path = write_json(_path(cfg, "speeds.json"), _speeds_payload(cfg, spec, report))
    return EXIT_OK, [path]


def _need_speed(spec, what):
    if not spec.has_speed:
        raise ConfigError(f"{what} needs a speed: set c (or eps) in [problem]")


def cmd_profile(cfg: RunConfig) -> tuple[int, list]:
    spec = cfg.spec()
    _need_speed(spec, "profile")
    report = speeds(spec.h, spec.kernel, spec.g, spec.q)
    lm = landmarks(spec.g)
    result = solve_profile(spec, cfg.solver)
    phi = result.profile
    analysis = analyze_wave(phi, lm, spec.g)
    notes = []
    if result.below_c_star:
        notes.append("below c*: no semi-wavefront is expected at this speed")
    diag = result.diagnostics()
    diag.update(analysis.as_dict())
    diag.update(
        c=spec.c,
        c_physical=physical_speed(cfg, spec.c),
        c_star=report.c_star,
        landmarks=lm.as_dict(),
        notes=notes,
        oscillatory=analysis.crossings >= 3,
    )
    if lm.slope_kappa < 0:
        scan = kappa_char_negative_root(spec.c, spec.h, lm.slope_kappa, spec.kernel)
        diag["tail_negative_root"] = scan["has_root"]
    files = [
        write_csv(_path(cfg, "profile.csv"), ["t", "phi"], zip(phi.t, phi.values)),
        write_json(_path(cfg, "diagnostics.json"), diag),
    ]
    if cfg.plots:
        from .plotting import plot_profile

        files.append(
            plot_profile(_path(cfg, "profile.png"), phi.t, phi.values, lm.kappa, lm.zeta1,
                         title=f"c = {physical_speed(cfg, spec.c):.4g}")
        )
    code = EXIT_OK if result.converged and not result.below_c_star else EXIT_NEGATIVE
    return code, files


def _certificate_payload(cfg, spec, report) -> dict:
    cert = wavefront_certificate(spec, report)
    out = cert.as_dict()
    floor = cert.details["mainex2_search"]["inputs"]["speed_floor"]
    # existence above the threshold and non-existence below it
    sharp = floor is not None and abs(floor - report.c_star) <= 1e-9 * report.c_star
    out["threshold"] = {
        "c_star": report.c_star,
        "c_star_physical": physical_speed(cfg, report.c_star),
        "mainex2_speed_floor": floor,
        "wavefront_iff_c_at_least_c_star": bool(sharp),
    }
    out["c"] = spec.c
    out["c_physical"] = physical_speed(cfg, spec.c)
    return out, cert


def cmd_certify(cfg: RunConfig) -> tuple[int, list]:
    spec = cfg.spec()
    _need_speed(spec, "certify")
    report = speeds(spec.h, spec.kernel, spec.g, spec.q)
    payload, cert = _certificate_payload(cfg, spec, report)
    path = write_json(_path(cfg, "certificate.json"), payload)
    return (EXIT_OK if cert.wavefront_certified else EXIT_NEGATIVE), [path]


def _sweep_point(job):
    problem, advection, param, value, mode, cached = job
    row = {"value": value}
    try:
        spec = build_problem(problem, **{param: value})
        report = cached or speeds(spec.h, spec.kernel, spec.g, spec.q)
        shim = RunConfig(problem=problem, solver=None, advection=advection)
        row.update(
            eps0=report.eps0,
            eps1=report.eps1,
            c_star=report.c_star,
            c_sharp=report.c_sharp,
            c_tilde_star=report.c_tilde_star,
        )
        if advection is not None:
            row["c_star_physical"] = physical_speed(shim, report.c_star)
        if spec.has_speed:
            cls = speed_classification(spec, report)
            row.update(c=spec.c, speed_class=cls["speed_class"],
                       semi_wavefront_exists=cls["semi_wavefront_exists"], persistent=cls["persistent"])
            if mode == "certify":
                cert = wavefront_certificate(spec, report)
                row.update(
                    wavefront_certified=cert.wavefront_certified,
                    Dc_value=cert.details["Dc"]["inputs"]["value"],
                    mainex2_value=cert.details["mainex2"]["inputs"]["value"],
                    oscillatory_predicted=cert.oscillatory_predicted,
                )
    except ArithmeticError as exc:
        row["error"] = f"arithmetic: {exc}"
    except ValueError as exc:
        row["error"] = f"invalid: {exc}"
    return row


def worker_count(n_jobs: int) -> int:
    env = os.environ.get("WAVECREST_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ConfigError(f"WAVECREST_THREADS must be an integer, got {env!r}") from None
    return max(1, min(cap, n_jobs))


def run_sweep(cfg: RunConfig, workers: int | None = None) -> list[dict]:
    sw = cfg.sweep
    grid = np.linspace(sw["start"], sw["stop"], sw["points"])
    cached = None
    if sw["parameter"] in ("c", "eps"):
        # speeds do not depend on the wave speed
        spec = cfg.spec()
        cached = speeds(spec.h, spec.kernel, spec.g, spec.q)
    jobs = [(cfg.problem, cfg.advection, sw["parameter"], float(v), sw["mode"], cached) for v in grid]
    n = workers if workers is not None else worker_count(len(jobs))
    if n <= 1:
        return [_sweep_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * n))))


def _plot_sweep(cfg, rows, header):
    from .plotting import plot_speed_classes, plot_sweep

    x = [r["value"] for r in rows]
    path = _path(cfg, "sweep.png")
    param = cfg.sweep["parameter"]
    if "speed_class" in header:
        first = next((r for r in rows if "c_star" in r), {})
        mark, label = first.get("c_star_physical", first.get("c_star")), "c*"
        if param == "eps":
            mark, label = first.get("eps0"), "eps0"
        return plot_speed_classes(path, x, [r.get("speed_class") for r in rows], SPEED_CLASSES, param, mark, label)
    names = ("c_star_physical",) if cfg.advection is not None else ("c_star", "c_tilde_star", "c_sharp")
    cols = {k: [r.get(k) for r in rows] for k in names if k in header}
    return plot_sweep(path, x, cols, param)


def cmd_sweep(cfg: RunConfig, workers: int | None = None) -> tuple[int, list]:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a [sweep] section")
    rows = run_sweep(cfg, workers)
    header = [cfg.sweep["parameter"]]
    for row in rows:
        for key in row:
            if key != "value" and key not in header:
                header.append(key)
    table = [[row["value"]] + [row.get(k) for k in header[1:]] for row in rows]
    files = [write_csv(_path(cfg, "sweep.csv"), header, table)]
    if cfg.plots:
        files.append(_plot_sweep(cfg, rows, header))
    errors = [r["error"] for r in rows if "error" in r]
    if any(e.startswith("arithmetic") for e in errors):
        return EXIT_ARITH, files
    if errors:
        return EXIT_USAGE, files
    return EXIT_OK, files


def cmd_reduce_advection(cfg: RunConfig) -> tuple[int, list]:
    if cfg.advection is None:
        raise ConfigError("reduce-advection needs D_m (and optionally B) in [problem]")
    D_m, B = cfg.advection
    spec = cfg.spec()
    _need_speed(spec, "reduce-advection")
    payload = {
        "D_m": D_m,
        "B": B,
        "h": spec.h,
        "c": physical_speed(cfg, spec.c),
        "eps": spec.eps,
        "c_scaled": spec.c,
        "kernel": spec.kernel.to_config(),
        "c_from_eps": B + math.sqrt(D_m / spec.eps),
    }
    sys.stdout.write(dumps(payload))
    return EXIT_OK, []


COMMANDS = {
    "speeds": cmd_speeds,
    "profile": cmd_profile,
    "certify": cmd_certify,
    "sweep": cmd_sweep,
    "reduce-advection": cmd_reduce_advection,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wavecrest", description="Travelling waves of delayed non-local reaction-diffusion equations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "speeds": "critical speeds c*, c#, c~* (writes speeds.json)",
        "profile": "solve for a wave profile (profile.csv, diagnostics.json)",
        "certify": "wavefront certificate at the configured speed (certificate.json)",
        "sweep": "speeds or certificates over a parameter grid (sweep.csv)",
        "reduce-advection": "print the scaling of the advective model",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.out_dir = args.out
        code, files = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"wavecrest: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"wavecrest: arithmetic failure: {exc}", file=sys.stderr)
        return EXIT_ARITH
    except ValueError as exc:
        print(f"wavecrest: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for f in files:
        print(f)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
