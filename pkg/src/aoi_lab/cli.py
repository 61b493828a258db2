"""Command-line driver: scenario file in, CSV tables out.

Exit status: 0 success, 2 configuration or usage error, 3 infeasible or
divergent operating point.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic
from .bounds import (analytical_lower_bound, ftt_power, numerical_lower_bound,
                     power_grid)
from .channel import ChannelModel, InfeasibleError
from .config import defaults_text, load_config
from .model import ATFixed, ConfigError, DivergenceError, Threshold
from .optimize import FAMILIES, CurveSpec, DeConfig, ftt_sweep, pareto_curve
from .simulate import SimConfig, simulate_batch, worker_count
from .smdp import build_model, interpolate_curve, solve_beta

DEFAULT_SEED = 20240101

SCHEMAS = {
    "channel.csv": "tau,power,energy",
    "curve_<family>.csv": "ftt, ftt-errfree, p: t_s,avg_age,avg_power,provenance | "
                          "at: h_a,t_s,... | threshold: beta,h,tau_a,tau_b,... | "
                          "npopt, popt: beta,lambda,t_s,... | smdp: beta,...",
    "smdp_frontier.csv": "beta,avg_age,avg_power,gain,iterations,span,converged",
    "smdp_policy.csv": "beta,age,tau",
    "bounds.csv": "p_c,A_l,A_n,A_ftt",
    "sim.csv": "replica,stream,avg_age,se_age,avg_power,se_power,deliveries,preemptions,transmissions",
    "fading.csv": "T,tau,power,avg_age,avg_power",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12g" % v
    return str(v)


def emit_csv(path, header, rows, manifest: str | None = None):
    """Write ``rows`` under ``header`` with 12 significant digits and LF endings."""
    path = Path(path)
    lines = []
    if manifest is not None:
        lines.append(f"# manifest: {manifest}")
    lines.append(",".join(header))
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r))
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc


def read_csv(path):
    """``(manifest, header, rows)``; numeric fields come back as floats."""
    manifest, header, rows = None, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# manifest: "):
            manifest = line[len("# manifest: "):]
            continue
        if line.startswith("#") or not line:
            continue
        cells = line.split(",")
        if header is None:
            header = cells
            continue
        row = []
        for c in cells:
            try:
                row.append(float(c))
            except ValueError:
                row.append(c)
        rows.append(row)
    return manifest, header, rows


def _gnuplot(csv_path: Path, x: int, y: int, title: str):
    gp = csv_path.with_suffix(".gp")
    gp.write_text(
        'set datafile separator ","\n'
        "set key autotitle columnhead\n"
        "set xlabel 'average power (mW)'\n"
        "set ylabel 'average age (slots)'\n"
        f"plot '{csv_path.name}' using {x}:{y} with linespoints title '{title}'\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _manifest(cfg, command: str, args: dict) -> str:
    blob = json.dumps({"tool": __version__, "command": command, "config": cfg.canonical(),
                       "args": args}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _target(out: Path, name: str, force: bool) -> Path:
    p = out / name
    if p.exists() and not force:
        raise UsageError(f"{p} exists; pass --force to overwrite")
    return p


def _de_config(cfg) -> DeConfig:
    return DeConfig(bounds=((0, 1),), population=cfg.get("solver", "de_population"),
                    F=cfg.get("solver", "de_F"), CR=cfg.get("solver", "de_CR"),
                    generations=cfg.get("solver", "de_generations"))


def cmd_channel(cfg, ns, out, manifest):
    ch = cfg.channel()
    path = _target(out, "channel.csv", ns.force)
    emit_csv(path, ["tau", "power", "energy"],
             [(int(t), p, t * p) for t, p in zip(ch.taus, ch.powers)], manifest)
    return [path]


def _curve_rows(family, pts):
    if family in ("ftt", "ftt-errfree", "p"):
        return ["t_s"], [(p.policy.t_s,) for p in pts]
    if family == "at":
        return ["h_a", "t_s"], [(p.policy.h_a, p.policy.t_s) for p in pts]
    if family == "threshold":
        return (["beta", "h", "tau_a", "tau_b"],
                [(p.extra["beta"], p.policy.h, p.policy.tau_a, p.policy.tau_b) for p in pts])
    if family in ("npopt", "popt"):
        return (["beta", "lambda", "t_s"],
                [(p.extra["beta"], p.extra["lambda"], p.policy.t_s) for p in pts])
    return ["beta"], [(p.extra["beta"],) for p in pts]


def cmd_curve(cfg, ns, out, manifest):
    fam = ns.family
    path = _target(out, f"curve_{fam}.csv", ns.force)
    spec = CurveSpec(fam, cfg.scenario(), betas=cfg.get("solver", "betas"), de=_de_config(cfg),
                     h_a_max=cfg.get("solver", "h_a_max"), h_max=cfg.get("solver", "h_max"),
                     horizon=cfg.get("solver", "horizon"),
                     warmup=cfg.get("solver", "warmup") if cfg.get("solver", "warmup") is not None
                     else cfg.get("solver", "horizon") // 10,
                     seed=ns.seed, parallelism=ns.threads, a_max=cfg.get("solver", "a_max"),
                     tol=cfg.get("solver", "tol"))
    pts = pareto_curve(spec)
    cols, params = _curve_rows(fam, pts)
    rows = [pr + (p.avg_age, p.avg_power, p.provenance) for pr, p in zip(params, pts)]
    emit_csv(path, cols + ["avg_age", "avg_power", "provenance"], rows, manifest)
    if ns.gnuplot:
        _gnuplot(path, len(cols) + 2, len(cols) + 1, fam)
    return [path]


def cmd_smdp(cfg, ns, out, manifest):
    sc = cfg.scenario()
    betas = tuple(ns.beta) if ns.beta else cfg.get("solver", "betas")
    p_front = _target(out, "smdp_frontier.csv", ns.force)
    p_pol = _target(out, "smdp_policy.csv", ns.force)
    base = build_model(sc, 0.0, cfg.get("solver", "a_max"))
    front, pol, init = [], [], None
    for b in betas:
        fp = solve_beta(base, b, cfg.get("solver", "tol"), cfg.get("solver", "max_iter"), init)
        init = fp.solution.values
        s = fp.solution
        front.append((b, fp.point.avg_age, fp.point.avg_power, fp.point.extra["gain"],
                      s.iterations, s.span, s.converged))
        pol.extend((b, int(a), int(t)) for a, t in zip(base.ages, s.actions))
    emit_csv(p_front, ["beta", "avg_age", "avg_power", "gain", "iterations", "span", "converged"],
             front, manifest)
    emit_csv(p_pol, ["beta", "age", "tau"], pol, manifest)
    if ns.gnuplot:
        _gnuplot(p_front, 3, 2, "smdp")
    return [p_front, p_pol]


def cmd_bounds(cfg, ns, out, manifest):
    sc = cfg.scenario()
    n = ns.pc_grid if ns.pc_grid is not None else cfg.get("solver", "pc_grid")
    if n < 1:
        raise ConfigError("--pc-grid must be >= 1")
    path = _target(out, "bounds.csv", ns.force)
    ftt = ftt_sweep(sc)
    curve = [(p.avg_power, p.avg_age) for p in ftt]
    rows = []
    for pc in power_grid(sc, n):
        a_n = numerical_lower_bound(sc, pc, cfg.get("solver", "stride"), cfg.get("solver", "numerator"))
        a_l = analytical_lower_bound(sc, pc)
        rows.append((pc, a_l.value, a_n.value, interpolate_curve(curve, pc)))
    emit_csv(path, ["p_c", "A_l", "A_n", "A_ftt"], rows, manifest)
    return [path]


def cmd_sim(cfg, ns, out, manifest):
    sc = cfg.scenario()
    pol = cfg.policy()
    if sc.model == "AT" and not isinstance(pol, ATFixed):
        raise ConfigError("the AT model needs [policy] kind = at")
    reps = ns.replicas if ns.replicas is not None else cfg.get("solver", "replicas")
    horizon = cfg.get("solver", "horizon")
    path = _target(out, "sim.csv", ns.force)
    try:
        confs = [SimConfig(sc, pol, horizon, cfg.get("solver", "warmup"), ns.seed, k,
                           trace_path=ns.trace if (ns.trace and k == 0) else None)
                 for k in range(reps)]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ests = simulate_batch(confs, ns.threads)
    rows = [(k, c.stream, e.avg_age, e.se_age, e.avg_power, e.se_power, e.deliveries,
             e.preemptions, e.transmissions) for k, (c, e) in enumerate(zip(confs, ests))]
    emit_csv(path, ["replica", "stream", "avg_age", "se_age", "avg_power", "se_power",
                    "deliveries", "preemptions", "transmissions"], rows, manifest)
    return [path]


def cmd_fading(cfg, ns, out, manifest):
    base = cfg.scenario()
    Ts = tuple(ns.T) if ns.T else cfg.get("solver", "fading_T")
    path = _target(out, "fading.csv", ns.force)
    K, N = cfg.require("channel", "K"), cfg.require("channel", "N")
    eps = cfg.require("channel", "epsilon")
    lo, hi = cfg.require("channel", "tau_min"), cfg.require("channel", "tau_max")
    rows = []
    for T in Ts:
        ch = ChannelModel.block_fading(K, N, eps, T, lo, hi, cfg.get("channel", "gain"))
        sc = base.with_(channel=ch, model="NP")
        for t, p in zip(ch.taus, ch.powers):
            pt = analytic.ftt_np(int(t), sc)
            rows.append((T, int(t), p, pt.avg_age, pt.avg_power))
    emit_csv(path, ["T", "tau", "power", "avg_age", "avg_power"], rows, manifest)
    if ns.gnuplot:
        _gnuplot(path, 5, 4, "fading")
    return [path]


COMMANDS = {"channel": cmd_channel, "curve": cmd_curve, "smdp": cmd_smdp,
            "bounds": cmd_bounds, "sim": cmd_sim, "fading": cmd_fading}


def build_parser() -> argparse.ArgumentParser:
    schemas = "\n".join(f"  {k}: {v}" for k, v in SCHEMAS.items())
    ap = argparse.ArgumentParser(
        prog="aoi-lab", formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Age of information versus transmit power on a short-packet link.",
        epilog=f"CSV outputs (each starts with '# manifest: <digest>'):\n{schemas}\n\n"
               "Environment: AOI_LAB_THREADS caps worker processes.\n"
               "Exit status: 0 ok, 2 config/usage error, 3 infeasible.")
    ap.add_argument("--print-defaults", action="store_true", help="print every config key with its default")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--scenario", required=True, help="config file (key=value sections or JSON)")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--threads", type=int, default=1, help="worker processes (capped by AOI_LAB_THREADS)")
        p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")

    common(sub.add_parser("channel", help="power per duration table", epilog="writes channel.csv: " + SCHEMAS["channel.csv"]))
    p = sub.add_parser("curve", help="tradeoff curve of a policy family",
                       epilog="writes curve_<family>.csv: " + SCHEMAS["curve_<family>.csv"])
    common(p)
    p.add_argument("--family", required=True, choices=FAMILIES)
    p = sub.add_parser("smdp", help="Lagrangian SMDP sweep and policy dump",
                       epilog="writes smdp_frontier.csv, smdp_policy.csv")
    common(p)
    p.add_argument("--beta", type=float, action="append", help="Lagrange weight (repeatable)")
    p = sub.add_parser("bounds", help="lower bounds over a power grid", epilog="writes bounds.csv: " + SCHEMAS["bounds.csv"])
    common(p)
    p.add_argument("--pc-grid", type=int, default=None, help="number of power budgets")
    p = sub.add_parser("sim", help="Monte Carlo simulation of [policy]", epilog="writes sim.csv: " + SCHEMAS["sim.csv"])
    common(p)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--trace", default=None, help="per-slot trace of replica 0 (large)")
    p = sub.add_parser("fading", help="block-fading power tables and FTT curves",
                       epilog="writes fading.csv: " + SCHEMAS["fading.csv"])
    common(p)
    p.add_argument("--T", type=int, action="append", help="coherence time (repeatable)")
    return ap


def _digest_args(ns) -> dict:
    skip = {"threads", "out", "force", "gnuplot", "scenario", "print_defaults", "trace"}
    return {k: v for k, v in sorted(vars(ns).items()) if k not in skip}


def run(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.print_defaults:
        print(defaults_text())
        return 0
    if ns.command is None:
        ap.print_usage(sys.stderr)
        return 2
    ns.threads = worker_count(ns.threads)
    try:
        cfg = load_config(ns.scenario)
        out = Path(ns.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = _manifest(cfg, ns.command, _digest_args(ns))
        paths = COMMANDS[ns.command](cfg, ns, out, manifest)
    except (ConfigError, UsageError) as exc:
        print(f"aoi-lab: error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleError, DivergenceError) as exc:
        print(f"aoi-lab: infeasible: {exc}", file=sys.stderr)
        return 3
    for p in paths:
        print(p)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
