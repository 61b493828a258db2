"""Seeded slot-level Monte Carlo simulation of the status-update link.

The simulator is event driven: it jumps from one generation, delivery or
preemption to the next and records the age as piecewise-linear runs and the
transmit power as piecewise-constant runs. Slot averages over any window are
then exact sums over those runs, so no per-slot loop is needed.

Slot conventions (shared with the analytic and SMDP modules):

* A packet generated at the start of slot ``T`` and sent in ``tau`` slots
  occupies slots ``T .. T+tau-1``. On success the age in slot ``T+tau`` is ``tau``.
* NP model: after a transmission ends at slot ``e`` the next packet is
  generated at ``e + G~`` with ``G~`` geometric on {0, 1, ...}.
* P model: generations form a Bernoulli process with gaps on {1, 2, ...}; a
  new packet preempts an unfinished transmission, which is charged only for
  the slots it used.
* AT model: a packet is generated as soon as the link is idle and the age is
  at least ``h_a``. The run starts as if a ``t_s``-slot packet had just been
  delivered.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (ATFixed, DivergenceError, FTT, InsufficientDataError,
                    Randomized, Scenario, Tabular, Threshold, TradeoffPoint,
                    policy_actions)

N_BATCHES = 30
AGE_GUARD = 10 ** 9
_CHUNK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario
    policy: object
    horizon: int
    warmup: int | None = None
    seed: int = 20240101
    stream: int = 0
    trace_path: str | None = None
    check: bool = False

    def __post_init__(self):
        warm = self.horizon // 10 if self.warmup is None else self.warmup
        object.__setattr__(self, "warmup", int(warm))
        object.__setattr__(self, "horizon", int(self.horizon))
        if not self.horizon > self.warmup >= 0:
            raise ValueError(f"need horizon > warmup >= 0, got {self.horizon}, {self.warmup}")
        if self.horizon - self.warmup < N_BATCHES:
            raise ValueError(f"measurement window shorter than {N_BATCHES} slots")
        if self.scenario.epsilon >= 1.0:
            raise DivergenceError("epsilon >= 1")
        bad = policy_actions(self.policy) - set(self.scenario.taus.tolist())
        if bad:
            raise ValueError(f"policy uses durations outside the action set: {sorted(bad)}")
        if (self.scenario.model == "AT") != isinstance(self.policy, ATFixed):
            raise ValueError("the AT model needs an ATFixed policy and ATFixed needs the AT model")


@dataclass(frozen=True)
class SimEstimate:
    avg_age: float
    avg_power: float
    se_age: float
    se_power: float
    deliveries: int
    preemptions: int
    transmissions: int
    horizon: int
    warmup: int

    def to_point(self, policy=None, digest="") -> TradeoffPoint:
        return TradeoffPoint(self.avg_age, self.avg_power, "simulated", policy, digest,
                             extra={"se_age": self.se_age, "se_power": self.se_power})


@dataclass
class SamplePath:
    """Age and power runs of one simulated trajectory."""

    age_t: np.ndarray      # run start slots
    age_v: np.ndarray      # age at run start, growing by one per slot
    pow_t: np.ndarray
    pow_v: np.ndarray
    deliveries: np.ndarray  # slots at which the age dropped
    horizon: int
    preemptions: int
    transmissions: int
    energy: float          # sum of P(tau) * slots actually transmitted, clipped at horizon
    initial_age: int
    events: list = field(default_factory=list)

    def _age_prefix(self):
        dur = np.diff(np.append(self.age_t, self.horizon)).astype(float)
        seg = dur * self.age_v + dur * (dur - 1.0) / 2.0
        return np.concatenate(([0.0], np.cumsum(seg)))

    def age_integral(self, t) -> np.ndarray:
        """Sum of A[s] over slots s < t (vectorised in ``t``)."""
        t = np.asarray(t, dtype=float)
        pre = self._age_prefix()
        i = np.searchsorted(self.age_t, t, side="right") - 1
        n = t - self.age_t[i]
        return pre[i] + n * self.age_v[i] + n * (n - 1.0) / 2.0

    def power_integral(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        dur = np.diff(np.append(self.pow_t, self.horizon)).astype(float)
        pre = np.concatenate(([0.0], np.cumsum(dur * self.pow_v)))
        i = np.searchsorted(self.pow_t, t, side="right") - 1
        return pre[i] + (t - self.pow_t[i]) * self.pow_v[i]


class _Draws:
    """Chunked random draws from one counter-based stream."""

    def __init__(self, rng: np.random.Generator, lam: float):
        self.rng = rng
        self.lam = lam
        self._g = np.empty(0, dtype=np.int64)
        self._u = np.empty(0)
        self._gi = self._ui = 0

    def gap(self) -> int:
        """Geometric on {1, 2, ...} with success probability lam."""
        if self._gi == self._g.size:
            self._g = self.rng.geometric(self.lam, _CHUNK) if self.lam < 1.0 else np.ones(_CHUNK, np.int64)
            self._gi = 0
        g = self._g[self._gi]
        self._gi += 1
        return int(g)

    def uniform(self) -> float:
        if self._ui == self._u.size:
            self._u = self.rng.random(_CHUNK)
            self._ui = 0
        u = self._u[self._ui]
        self._ui += 1
        return float(u)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(seed, stream)``; independent of run order."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def _decider(policy, draws: _Draws):
    if isinstance(policy, (FTT, ATFixed)):
        t = policy.t_s
        return lambda age: t
    if isinstance(policy, (Threshold, Tabular)):
        return policy.action
    if isinstance(policy, Randomized):
        cdf = np.cumsum(policy.pmf)
        cdf[-1] = 1.0
        taus = policy.taus
        return lambda age: taus[int(np.searchsorted(cdf, draws.uniform(), side="right"))]
    raise TypeError(f"unsupported policy {policy!r}")


def run_path(cfg: SimConfig) -> SamplePath:
    """Simulate one trajectory over ``[0, horizon)``."""
    sc = cfg.scenario
    H = cfg.horizon
    eps = sc.epsilon
    draws = _Draws(make_rng(cfg.seed, cfg.stream), sc.lam if sc.model != "AT" else 1.0)
    decide = _decider(cfg.policy, draws)
    power_of = {int(t): float(p) for t, p in zip(sc.taus, sc.channel.powers)}
    trace = cfg.trace_path is not None

    age_t, age_v, pow_t, pow_v, deliv = [], [], [], [], []
    events = []
    energy = 0.0
    n_tx = n_pre = 0

    def new_age(t, a):
        age_t.append(t)
        age_v.append(a)

    def set_power(t, p):
        pow_t.append(t)
        pow_v.append(p)

    a0 = cfg.policy.t_s if sc.model == "AT" else sc.tau_min
    new_age(0, a0)
    set_power(0, 0.0)
    last_t, last_a = 0, a0  # most recent age run

    def age_at(t):
        return last_a + (t - last_t)

    t = 0
    if sc.model == "NP":
        while t < H:
            T = t + draws.gap() - 1
            if T >= H:
                break
            a = age_at(T)
            if a > AGE_GUARD:
                raise DivergenceError(f"age exceeded {AGE_GUARD} at slot {T}")
            tau = decide(a)
            p = power_of[tau]
            end = T + tau
            set_power(T, p)
            set_power(end, 0.0)
            n_tx += 1
            energy += p * (min(end, H) - T)
            if trace:
                events.append((T, "gen"))
            ok = draws.uniform() >= eps
            if end < H:
                if ok:
                    if cfg.check and not tau <= age_at(end):
                        raise AssertionError(f"age would rise on delivery at slot {end}")
                    new_age(end, tau)
                    last_t, last_a = end, tau
                    deliv.append(end)
                if trace:
                    events.append((end, "deliver" if ok else "fail"))
            t = end
    elif sc.model == "P":
        T = draws.gap() - 1
        while T < H:
            a = age_at(T)
            if a > AGE_GUARD:
                raise DivergenceError(f"age exceeded {AGE_GUARD} at slot {T}")
            tau = decide(a)
            p = power_of[tau]
            nxt = T + draws.gap()
            n_tx += 1
            if trace:
                events.append((T, "gen"))
            set_power(T, p)
            if nxt < T + tau:
                # preempted by the next generation
                n_pre += 1
                energy += p * (min(nxt, H) - T)
                if trace and nxt < H:
                    events.append((nxt, "preempt"))
            else:
                end = T + tau
                energy += p * (min(end, H) - T)
                set_power(end, 0.0)
                ok = draws.uniform() >= eps
                if end < H:
                    if ok:
                        new_age(end, tau)
                        last_t, last_a = end, tau
                        deliv.append(end)
                    if trace:
                        events.append((end, "deliver" if ok else "fail"))
            T = nxt
    else:  # AT
        h_a = cfg.policy.h_a
        tau = cfg.policy.t_s
        p = power_of[tau]
        while t < H:
            a = age_at(t)
            T = t + max(0, h_a - a)
            if T >= H:
                break
            if age_at(T) > AGE_GUARD:
                raise DivergenceError(f"age exceeded {AGE_GUARD} at slot {T}")
            end = T + tau
            set_power(T, p)
            set_power(end, 0.0)
            n_tx += 1
            energy += p * (min(end, H) - T)
            if trace:
                events.append((T, "gen"))
            ok = draws.uniform() >= eps
            if end < H:
                if ok:
                    new_age(end, tau)
                    last_t, last_a = end, tau
                    deliv.append(end)
                if trace:
                    events.append((end, "deliver" if ok else "fail"))
            t = end

    if age_at(H) > AGE_GUARD:
        raise DivergenceError(f"age exceeded {AGE_GUARD} before slot {H}")
    path = SamplePath(
        np.asarray(age_t, dtype=np.int64), np.asarray(age_v, dtype=float),
        np.asarray(pow_t, dtype=np.int64), np.asarray(pow_v, dtype=float),
        np.asarray(deliv, dtype=np.int64), H, n_pre, n_tx, energy, a0, events)
    if cfg.check:
        _check_path(path)
    if trace:
        write_trace(path, cfg.trace_path, sc.model)
    return path


def _check_path(path: SamplePath):
    """Assert the age/energy invariants on a finished path."""
    # the age only drops at deliveries, and never rises there
    t, v = path.age_t, path.age_v
    before = v[:-1] + np.diff(t)
    if np.any(v[1:] > before):
        raise AssertionError("age increased at a delivery")
    if not np.array_equal(t[1:], path.deliveries):
        raise AssertionError("age runs do not line up with deliveries")
    total = float(path.power_integral(path.horizon))
    if not math.isclose(total, path.energy, rel_tol=1e-9, abs_tol=1e-9):
        raise AssertionError(f"energy mismatch: runs {total} vs ledger {path.energy}")


def write_trace(path: SamplePath, out: str, model: str):
    """One line per slot: ``t,age,power,event``."""
    tags = {}
    for s, tag in path.events:
        tags[s] = tag if s not in tags else tags[s] + "+" + tag
    ages = path.age_v[np.searchsorted(path.age_t, np.arange(path.horizon), "right") - 1]
    ages = ages + (np.arange(path.horizon) - path.age_t[np.searchsorted(path.age_t, np.arange(path.horizon), "right") - 1])
    pw = path.pow_v[np.searchsorted(path.pow_t, np.arange(path.horizon), "right") - 1]
    with open(out, "w", newline="\n") as fh:
        fh.write(f"# model={model} initial_age={path.initial_age}\n")
        fh.write("t,age,power,event\n")
        for s in range(path.horizon):
            fh.write(f"{s},{int(ages[s])},{pw[s]:.12g},{tags.get(s, '')}\n")


def _batch_means(total_fn, lo: int, hi: int):
    edges = np.linspace(lo, hi, N_BATCHES + 1).round()
    sums = np.diff(total_fn(edges))
    means = sums / np.diff(edges)
    overall = float(sums.sum() / (hi - lo))
    se = float(np.std(means, ddof=1) / math.sqrt(N_BATCHES))
    return overall, se


def simulate(cfg: SimConfig) -> SimEstimate:
    """Time-average age and power over ``[warmup, horizon)``."""
    path = run_path(cfg)
    age, se_a = _batch_means(path.age_integral, cfg.warmup, cfg.horizon)
    pw, se_p = _batch_means(path.power_integral, cfg.warmup, cfg.horizon)
    n_del = int(np.count_nonzero(path.deliveries >= cfg.warmup))
    return SimEstimate(age, pw, se_a, se_p, n_del, path.preemptions, path.transmissions,
                       cfg.horizon, cfg.warmup)


def worker_count(requested: int | None = None) -> int:
    """Requested parallelism, capped by ``AOI_LAB_THREADS`` when set."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("AOI_LAB_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, int(n))


def parallel_map(fn, items, parallelism: int | None = 1):
    items = list(items)
    n = worker_count(parallelism)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))


def simulate_batch(configs, parallelism: int | None = 1) -> list[SimEstimate]:
    """Run independent configs; results do not depend on ``parallelism``."""
    return parallel_map(simulate, configs, parallelism)


def seeds_for(cfg: SimConfig, n: int) -> list[SimConfig]:
    """``n`` replicas of ``cfg`` on consecutive streams."""
    return [replace(cfg, stream=cfg.stream + i) for i in range(n)]


@dataclass(frozen=True)
class CycleStats:
    n_cycles: int
    mean_length: float
    se_mean_length: float
    second_moment: float
    se_second_moment: float
    mean_energy: float
    se_mean_energy: float


def renewal_census(cfg: SimConfig) -> CycleStats:
    """Moments of the intervals between successive deliveries after warmup."""
    if isinstance(cfg.policy, (Threshold, Tabular, Randomized)):
        raise ValueError("renewal cycles are defined for fixed-duration policies only")
    path = run_path(cfg)
    d = path.deliveries[path.deliveries >= cfg.warmup]
    if d.size < 101:
        raise InsufficientDataError(f"only {max(d.size - 1, 0)} complete cycles observed; need 100")
    lengths = np.diff(d).astype(float)
    energies = np.diff(path.power_integral(d.astype(float)))
    n = lengths.size
    sq = lengths ** 2

    def se(x):
        return float(np.std(x, ddof=1) / math.sqrt(n))

    return CycleStats(n, float(lengths.mean()), se(lengths), float(sq.mean()), se(sq),
                      float(energies.mean()), se(energies))
