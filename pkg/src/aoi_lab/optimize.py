"""Differential evolution and tradeoff-curve builders."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytic
from .model import (ATFixed, DivergenceError, FTT, Scenario, Threshold,
                    TradeoffPoint)
from .simulate import SimConfig, make_rng, parallel_map, simulate
from .smdp import sweep_beta

DEFAULT_BETAS = (0.0, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6)
FAMILIES = ("ftt", "ftt-errfree", "threshold", "npopt", "popt", "p", "at", "smdp")


@dataclass(frozen=True)
class DeConfig:
    bounds: tuple                 # ((lo, hi), ...) per parameter
    integer: tuple = ()           # bool per parameter; empty means all continuous
    population: int = 30
    F: float = 0.7
    CR: float = 0.9
    generations: int = 300
    seed: int = 12345
    stream: int = 0

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be >= 4")
        if not 0.0 < self.F < 2.0:
            raise ValueError("F must lie in (0, 2)")
        if not 0.0 <= self.CR <= 1.0:
            raise ValueError("CR must lie in [0, 1]")
        if self.integer and len(self.integer) != len(self.bounds):
            raise ValueError("integer mask length must match bounds")


@dataclass
class DeResult:
    x: np.ndarray
    value: float
    history: list = field(default_factory=list)  # best value after each generation
    evaluations: int = 0


def differential_evolution(objective, cfg: DeConfig, init=None) -> DeResult:
    """Minimise ``objective`` over a box with DE/rand/1/bin.

    Integer coordinates are rounded before every evaluation. Non-finite
    objective values count as ``+inf``. ``init`` rows replace the first
    members of the random initial population.
    """
    lo = np.array([b[0] for b in cfg.bounds], dtype=float)
    hi = np.array([b[1] for b in cfg.bounds], dtype=float)
    dim = lo.size
    mask = np.array(cfg.integer if cfg.integer else [False] * dim, dtype=bool)
    rng = make_rng(cfg.seed, cfg.stream)
    n = cfg.population

    def coerce(x):
        x = np.clip(x, lo, hi)
        return np.where(mask, np.round(x), x)

    def score(x):
        try:
            v = float(objective(coerce(x)))
        except (DivergenceError, ZeroDivisionError, OverflowError):
            return math.inf
        return v if math.isfinite(v) else math.inf

    pop = lo + rng.random((n, dim)) * (hi - lo)
    if init is not None:
        init = np.atleast_2d(np.asarray(init, dtype=float))[:n]
        pop[: init.shape[0]] = init
    fit = np.array([score(x) for x in pop])
    evals = n
    history = []
    idx = np.arange(n)
    for _ in range(cfg.generations):
        for i in range(n):
            others = idx[idx != i]
            r1, r2, r3 = rng.choice(others, 3, replace=False)
            mutant = np.clip(pop[r1] + cfg.F * (pop[r2] - pop[r3]), lo, hi)
            cross = rng.random(dim) < cfg.CR
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop[i])
            f = score(trial)
            evals += 1
            if f <= fit[i]:
                pop[i], fit[i] = trial, f
        history.append(float(fit.min()))
    best = int(np.argmin(fit))
    return DeResult(coerce(pop[best]), float(fit[best]), history, evals)


# ---------------------------------------------------------------------------
# Pareto utilities
# ---------------------------------------------------------------------------

def pareto_filter(points):
    """Points not dominated in (power, age), sorted by increasing power.

    Along the result the age strictly decreases as power increases.
    """
    out = []
    best = math.inf
    for pt in sorted(points, key=lambda p: (p.avg_power, p.avg_age)):
        if pt.avg_age < best:
            out.append(pt)
            best = pt.avg_age
    return out


def dominates_curve(upper, lower, slack: float = 0.0):
    """For each point of ``upper``, whether some ``lower`` point has power <= and age <= (1+slack)."""
    lp = np.array([p.avg_power for p in lower])
    la = np.array([p.avg_age for p in lower])
    res = []
    for pt in upper:
        ok = lp <= pt.avg_power * (1.0 + 1e-12)
        res.append(bool(ok.any() and la[ok].min() <= pt.avg_age * (1.0 + slack)))
    return res


# ---------------------------------------------------------------------------
# Curve families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurveSpec:
    family: str
    scenario: Scenario
    betas: tuple = DEFAULT_BETAS
    de: DeConfig | None = None
    h_a_max: int | None = None
    h_max: int | None = None
    horizon: int = 10 ** 6
    warmup: int = 10 ** 5
    seed: int = 12345
    parallelism: int = 1
    a_max: int | None = None
    tol: float = 1e-8

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.family in ("threshold", "npopt", "popt", "smdp"):
            if not self.betas or list(self.betas) != sorted(self.betas):
                raise ValueError("betas must be non-empty and sorted")


def _de(spec: CurveSpec, bounds, integer, stream) -> DeConfig:
    base = spec.de or DeConfig(bounds=bounds)
    return replace(base, bounds=bounds, integer=integer, seed=spec.seed, stream=stream)


def ftt_sweep(scenario: Scenario, errorfree: bool = False) -> list[TradeoffPoint]:
    fn = analytic.ftt_errorfree if errorfree else analytic.ftt_np
    return [fn(int(t), scenario) for t in scenario.taus]


def p_sweep(scenario: Scenario) -> list[TradeoffPoint]:
    out = []
    for t in scenario.taus:
        try:
            out.append(analytic.ftt_preemptive(int(t), scenario))
        except DivergenceError:
            continue
    return out


def at_sweep(scenario: Scenario, h_a_max: int | None = None) -> list[TradeoffPoint]:
    """Pareto-minimal ``(h_a, t_s)`` pairs; thresholds below ``t_s`` are skipped as duplicates."""
    sc = scenario.with_(model="AT")
    h_a_max = 20 * sc.tau_max if h_a_max is None else int(h_a_max)
    eps = sc.epsilon
    s = 1.0 - eps
    taus = sc.taus.astype(float)
    pw = sc.channel.powers
    h = np.arange(0, h_a_max + 1, dtype=float)
    T, H = np.meshgrid(taus, h, indexing="ij")
    Pm = np.broadcast_to(pw[:, None], T.shape)
    valid = H >= T
    D = H - T
    age = T + (D * D * s * s + T * T * (1 + eps) + 2 * D * T * s) / (2 * s * (D * s + T)) - 0.5
    power = Pm * T / (D * s + T)
    order = np.lexsort((age[valid], power[valid]))
    ages, powers = age[valid][order], power[valid][order]
    ts, hs = T[valid][order], H[valid][order]
    keep = ages < np.minimum.accumulate(np.concatenate(([np.inf], ages[:-1])))
    dig = sc.digest()
    return [TradeoffPoint(float(a), float(p), "analytic", ATFixed(int(hh), int(t)), dig)
            for a, p, t, hh in zip(ages[keep], powers[keep], ts[keep], hs[keep])]


def _threshold_objective(scenario: Scenario, beta: float):
    allowed = set(scenario.taus.tolist())

    def f(x):
        h, ta, tb = int(x[0]), int(x[1]), int(x[2])
        ta, tb = max(ta, tb), min(ta, tb)
        if ta not in allowed or tb not in allowed:
            return math.inf
        pt = analytic.threshold_errorfree(h, ta, tb, scenario)
        return pt.avg_age + beta * pt.avg_power
    return f


def _threshold_step(args):
    spec, k, beta = args
    sc = spec.scenario
    ef = sc.errorfree()
    ftt = ftt_sweep(ef)
    best = min(ftt, key=lambda p: p.avg_age + beta * p.avg_power)
    h_max = spec.h_max if spec.h_max is not None else sc.tau_max + math.ceil(20.0 / sc.lam)
    bounds = ((0, h_max), (sc.tau_min, sc.tau_max), (sc.tau_min, sc.tau_max))
    cfg = _de(spec, bounds, (True, True, True), k)
    t = best.policy.t_s
    res = differential_evolution(_threshold_objective(ef, beta), cfg, init=[[0, t, t]])
    h, ta, tb = (int(v) for v in res.x)
    ta, tb = max(ta, tb), min(ta, tb)
    pol = Threshold(h, ta, tb)
    est = simulate(SimConfig(sc, pol, spec.horizon, spec.warmup, spec.seed, k))
    return TradeoffPoint(est.avg_age, est.avg_power, "simulated", pol, sc.digest(),
                         extra={"beta": beta, "de_value": res.value,
                                "se_age": est.se_age, "se_power": est.se_power})


def threshold_curve(spec: CurveSpec) -> list[TradeoffPoint]:
    """Optimise on the error-free formula, then simulate the chosen parameters on the real link."""
    jobs = [(spec, k, float(b)) for k, b in enumerate(spec.betas)]
    return parallel_map(_threshold_step, jobs, spec.parallelism)


def _joint_step(args):
    spec, k, beta = args
    sc = spec.scenario
    pre = spec.family == "popt"
    fn = analytic.ftt_preemptive if pre else analytic.ftt_np
    model = "P" if pre else "NP"
    taus = sc.taus
    allowed = set(taus.tolist())

    def f(x):
        t = int(x[1])
        if t not in allowed:
            return math.inf
        pt = fn(t, sc.with_(lam=float(x[0]), model=model))
        return pt.avg_age + beta * pt.avg_power

    bounds = ((1e-4, 0.999), (float(taus[0]), float(taus[-1])))
    cfg = _de(spec, bounds, (False, True), k)
    res = differential_evolution(f, cfg, init=[[sc.lam, float(taus[0])], [sc.lam, float(taus[-1])]])
    lam, t = float(res.x[0]), int(res.x[1])
    pt = fn(t, sc.with_(lam=lam, model=model))
    return TradeoffPoint(pt.avg_age, pt.avg_power, "analytic", FTT(t), sc.digest(),
                         extra={"beta": beta, "lambda": lam})


def pareto_curve(spec: CurveSpec) -> list[TradeoffPoint]:
    sc = spec.scenario
    fam = spec.family
    if fam == "ftt":
        return ftt_sweep(sc)
    if fam == "ftt-errfree":
        return ftt_sweep(sc, errorfree=True)
    if fam == "p":
        return p_sweep(sc.with_(model="P"))
    if fam == "at":
        return at_sweep(sc, spec.h_a_max)
    if fam == "threshold":
        return threshold_curve(spec)
    if fam in ("npopt", "popt"):
        jobs = [(spec, k, float(b)) for k, b in enumerate(spec.betas)]
        return pareto_filter(parallel_map(_joint_step, jobs, spec.parallelism))
    # smdp
    pts = []
    for fp in sweep_beta(sc, spec.betas, spec.a_max, spec.tol):
        pts.append(fp.point)
    return pts
