"""Command-line front end.

Exit codes: 0 success, 1 configuration or validation error, 2 numerical
failure, 3 inconclusive verdict under ``classify --strict``.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import numpy as np

from .analysis import classify, sync_diagnostics
from .io import ConfigError, dumps, load_config, write_csv, write_path_csv
from .lyapunov import r_best, r_closedform_2patch, r_logslope, r_timeavg
from .model import ExplicitGamma, SigmaCorrelation, dispersal, two_patch, validate_spec
from .robustness import r_continuity_scan, scan_summary
from .sde import SimConfig, SimulationError, simulate_linearized_logS, simulate_x

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INCONCLUSIVE = 0, 1, 2, 3

FIGURE_ALPHAS = np.round(np.arange(0.5, 20.0 + 1e-9, 0.5), 10)
FIGURE_RHOS = (0.0, 0.5, 0.9, 1.0)


class _ConfigStage(Exception):
    pass


def _load(path, check: bool = True):
    try:
        conf = load_config(path)
    except ConfigError as exc:
        raise _ConfigStage(str(exc)) from exc
    if check:
        report = validate_spec(conf.spec)
        if not report.ok:
            raise _ConfigStage("invalid model: " + report.errors[0])
    return conf


def _x0(conf, default=None):
    x0 = conf.analysis.get("x0")
    if x0 is None:
        return np.ones(conf.spec.n) if default is None else np.asarray(default, float)
    return np.asarray(x0, dtype=float)


def _y0(conf):
    y0 = conf.analysis.get("y0")
    return np.full(conf.spec.n, 1.0 / conf.spec.n) if y0 is None else np.asarray(y0, float)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    conf = _load(args.config, check=False)
    report = validate_spec(conf.spec)
    print(dumps(report.to_dict()))
    if not report.ok:
        raise _ConfigStage("invalid model: " + report.errors[0])
    return EXIT_OK


def cmd_simulate(args) -> int:
    conf = _load(args.config)
    spec, cfg = conf.spec, conf.sim
    if args.coords == "simplex":
        path, _ = simulate_linearized_logS(spec, cfg, _y0(conf))
    else:
        path = simulate_x(spec, cfg, _x0(conf))
        if args.coords == "ys":
            path = path.to_ys()
    write_path_csv(path, args.out)
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    conf = _load(args.config)
    spec, cfg = conf.spec, conf.sim
    if args.method == "timeavg":
        est = r_timeavg(spec, cfg, _y0(conf))
    elif args.method == "logslope":
        est = r_logslope(spec, cfg, _y0(conf))
    else:
        if spec.n != 2:
            raise ValueError("closedform needs exactly two patches")
        est = r_closedform_2patch(spec)
    if args.json:
        print(dumps(est.to_dict()))
    else:
        print(f"r = {est.value:.10g} +/- {est.stderr:.3g} ({est.method.value})")
    return EXIT_OK


def cmd_classify(args) -> int:
    conf = _load(args.config)
    v = classify(conf.spec, conf.sim, conf.analysis.get("band"))
    if args.json:
        print(dumps(v.to_dict()))
    else:
        print(v.label)
    if args.strict and v.label == "Inconclusive":
        print("verdict inconclusive: |r| within the decision band", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
    except ValueError as exc:
        raise _ConfigStage(f"grid must be LO:HI:STEP, got {text!r}") from exc
    if step <= 0 or hi < lo:
        raise _ConfigStage(f"grid must satisfy LO <= HI and STEP > 0, got {text!r}")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _with_param(spec, param, value):
    if param == "alpha":
        if spec.n != 2:
            raise _ConfigStage("--param alpha needs exactly two patches")
        return spec.replace(D=dispersal(value, spec.D[1, 0]))
    noise = spec.noise
    if param == "rho":
        if not isinstance(noise, SigmaCorrelation):
            raise _ConfigStage("--param rho needs a sigma/R noise block")
        R = np.full((spec.n, spec.n), value)
        np.fill_diagonal(R, 1.0)
        return spec.replace(noise=SigmaCorrelation(noise.sigma, R))
    if isinstance(noise, SigmaCorrelation):
        return spec.replace(noise=SigmaCorrelation(np.full(spec.n, value), noise.R))
    g = np.asarray(spec.gamma, float)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    return spec.replace(noise=ExplicitGamma(np.where(norms > 0, g / norms * value, 0.0)))


def _estimate(spec, cfg):
    est = r_best(spec, cfg)
    return est.value, est.stderr, est.method.value


def cmd_scan(args) -> int:
    conf = _load(args.config)
    grid = parse_grid(args.grid)
    specs = [_with_param(conf.spec, args.param, v) for v in grid]
    for s in specs:
        rep = validate_spec(s)
        if not rep.ok:
            raise _ConfigStage("invalid model in scan: " + rep.errors[0])
    rows = [(v,) + _estimate(s, conf.sim) for v, s in zip(grid, specs)]
    write_csv(args.out, "scan", conf.sim.seed, ["param", "r", "stderr", "method"], rows)
    return EXIT_OK


def figure_rows(alphas=FIGURE_ALPHAS, rhos=FIGURE_RHOS, cfg: Optional[SimConfig] = None) -> list:
    """``(alpha, rho, r, stderr, method)`` for a=(3,4), sigma^2=7 and alpha = beta."""
    sig = 7.0**0.5
    rows = []
    for rho in rhos:
        for al in alphas:
            est = r_best(two_patch(3.0, 4.0, al, al, sig, sig, rho), cfg)
            rows.append((float(al), float(rho), est.value, est.stderr, est.method.value))
    return rows


def cmd_figure(args) -> int:
    rows = figure_rows(cfg=SimConfig(t_end=1e4, seed=args.seed))
    write_csv(args.out, "figure", args.seed, ["alpha", "rho", "r", "stderr", "method"], rows)
    return EXIT_OK


def cmd_robustness(args) -> int:
    conf = _load(args.config)
    if args.theta < 0 or args.trials < 1:
        raise _ConfigStage("need --theta >= 0 and --trials >= 1")
    rows = r_continuity_scan(conf.spec, [args.theta], args.trials, seed=conf.sim.seed, cfg=conf.sim)
    header = ["theta", "trial", "r_base", "r_pert", "abs_dev"]
    write_csv(args.out, "robustness", conf.sim.seed, header, ([r[h] for h in header] for r in rows))
    print(dumps(scan_summary(rows)))
    return EXIT_OK


def cmd_sync(args) -> int:
    conf = _load(args.config)
    path = simulate_x(conf.spec, conf.sim, _x0(conf, default=(2.0, 1.0)))
    rep = sync_diagnostics(path)
    u = rep.u_path.states[:, 0]
    rows = (
        (t, x[0], x[1], z, uu) for t, x, z, uu in zip(path.times, path.states, rep.z, u)
    )
    write_csv(args.out, "sync", conf.sim.seed, ["t", "x1", "x2", "z", "u"], rows)
    print(dumps(rep.to_dict()))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="patchdyn", description="Stochastic patch population dynamics.")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help_, config=True):
        sp = sub.add_parser(name, help=help_)
        if config:
            sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.set_defaults(fn=fn)
        return sp

    cmd("validate", cmd_validate, "check a model and print the report as JSON")
    sp = cmd("simulate", cmd_simulate, "simulate a trajectory to CSV")
    sp.add_argument("--coords", choices=["x", "ys", "simplex"], default="x")
    sp.add_argument("--out", required=True)
    sp = cmd("lyapunov", cmd_lyapunov, "estimate the stochastic growth rate")
    sp.add_argument("--method", choices=["timeavg", "logslope", "closedform"], default="timeavg")
    sp.add_argument("--json", action="store_true")
    sp = cmd("classify", cmd_classify, "persistence verdict")
    sp.add_argument("--strict", action="store_true", help="exit 3 when inconclusive")
    sp.add_argument("--json", action="store_true")
    sp = cmd("scan", cmd_scan, "growth rate along a parameter grid")
    sp.add_argument("--param", choices=["alpha", "rho", "sigma"], required=True)
    sp.add_argument("--grid", required=True, help="LO:HI:STEP")
    sp.add_argument("--out", required=True)
    sp = cmd("figure", cmd_figure, "growth rate against dispersal for several correlations", config=False)
    sp.add_argument("--preset", choices=["evans-correlation"], required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp = cmd("robustness", cmd_robustness, "deviation of r under random perturbations")
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--trials", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp = cmd("sync", cmd_sync, "synchronization diagnostics for two patches under one driver")
    sp.add_argument("--out", required=True)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _ConfigStage as exc:
        print(f"patchdyn: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"patchdyn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
