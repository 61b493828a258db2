"""Average-cost semi-Markov decision process over the age at generation epochs.

State: age ``a`` when a packet is generated, truncated to ``tau_min..a_max``
with the tail mass lumped on ``a_max``. Action: transmission duration
``tau``. From ``(a, tau)`` the next decision age is ``tau + G~`` after a
delivery and ``a + tau + G~`` after a loss. The single-stage cost is the
age summed over the epoch plus ``beta`` times the epoch energy, and the
expected epoch length is ``tau + E[G~]``.

The SMDP is turned into a unit-time MDP by the standard data
transformation and solved by relative value iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import Scenario, Tabular, TradeoffPoint


@dataclass(frozen=True)
class SmdpModel:
    scenario: Scenario
    beta: float
    a_max: int
    ages: np.ndarray        # decision ages tau_min..a_max
    taus: np.ndarray        # action set
    age_cost: np.ndarray    # (n_states, n_actions) expected age summed over the epoch
    energy: np.ndarray      # (n_actions,) P(tau) * tau
    epoch: np.ndarray       # (n_actions,) tau + E[G~]
    lift: np.ndarray        # (n_states, n_states) age b -> distribution of min(b + G~, a_max)
    succ_idx: np.ndarray    # (n_actions,) state index of age tau
    fail_idx: np.ndarray    # (n_states, n_actions) state index of min(a + tau, a_max)

    @property
    def cost(self) -> np.ndarray:
        return self.age_cost + self.beta * self.energy[None, :]

    @property
    def n_states(self) -> int:
        return self.ages.size

    def state_index(self, age: int) -> int:
        return int(min(max(age, self.ages[0]), self.a_max) - self.ages[0])

    def kernel_row(self, age: int, tau: int) -> np.ndarray:
        """Next-age distribution over ``ages`` from state ``age`` under ``tau``."""
        i = self.state_index(age)
        j = self.scenario.channel.index(tau)
        eps = self.scenario.epsilon
        return (1.0 - eps) * self.lift[self.succ_idx[j]] + eps * self.lift[self.fail_idx[i, j]]

    def expected_next(self, h: np.ndarray) -> np.ndarray:
        """``E[h(next age)]`` for every (state, action) pair."""
        s = self.lift @ h
        eps = self.scenario.epsilon
        return (1.0 - eps) * s[self.succ_idx][None, :] + eps * s[self.fail_idx]

    def with_beta(self, beta: float) -> "SmdpModel":
        return SmdpModel(self.scenario, float(beta), self.a_max, self.ages, self.taus,
                         self.age_cost, self.energy, self.epoch, self.lift,
                         self.succ_idx, self.fail_idx)


def default_a_max(scenario: Scenario) -> int:
    return scenario.tau_max + math.ceil(20.0 / scenario.lam)


def build_model(scenario: Scenario, beta: float, a_max: int | None = None) -> SmdpModel:
    """Truncated SMDP for the non-preemptive link."""
    if scenario.model != "NP":
        raise ValueError("the SMDP covers the non-preemptive generation model only")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if a_max is None:
        a_max = default_a_max(scenario)
    if a_max < scenario.tau_max + 1:
        raise ValueError(f"a_max={a_max} must be at least tau_max + 1 = {scenario.tau_max + 1}")
    lam, eps = scenario.lam, scenario.epsilon
    wait = scenario.mean_wait
    ages = np.arange(scenario.tau_min, a_max + 1)
    taus = scenario.taus
    a = ages[:, None].astype(float)
    t = taus[None, :].astype(float)
    age_cost = a * t + t * (t - 1.0) / 2.0 + t * wait + wait ** 2 + eps * a * wait

    n = ages.size
    k = np.arange(n)
    gap = k[None, :] - k[:, None]
    with np.errstate(invalid="ignore"):
        lift = np.where(gap >= 0, lam * (1.0 - lam) ** np.maximum(gap, 0), 0.0)
    lift[:, -1] = (1.0 - lam) ** (n - 1 - k)  # everything from a_max upward

    succ_idx = taus - scenario.tau_min
    fail_idx = np.minimum(ages[:, None] + taus[None, :], a_max) - scenario.tau_min
    energy = taus * scenario.channel.powers
    epoch = taus + wait
    for arr in (ages, age_cost, energy, epoch, lift, succ_idx, fail_idx):
        arr.setflags(write=False)
    return SmdpModel(scenario, float(beta), int(a_max), ages, taus, age_cost, energy,
                     epoch.astype(float), lift, succ_idx, fail_idx)


@dataclass
class SmdpSolution:
    policy: Tabular
    actions: np.ndarray     # duration per state in model.ages
    gain: float
    gain_bounds: tuple
    values: np.ndarray
    iterations: int
    span: float
    converged: bool
    beta: float
    a_max: int


def value_iteration(model: SmdpModel, tol: float = 1e-8, max_iter: int = 100_000,
                    init: np.ndarray | None = None) -> SmdpSolution:
    """Relative value iteration on the data-transformed SMDP.

    Stops once the spread of ``V_{n+1} - V_n`` (which brackets the optimal
    gain) falls below ``tol * max(1, |gain|)``. Ties in the greedy step go
    to the shortest duration.
    """
    cost = model.cost
    epoch = model.epoch[None, :]
    eta = 0.5 * float(model.epoch.min())
    rate = eta / epoch
    rate_cost = cost / epoch
    v = np.zeros(model.n_states) if init is None else np.array(init, dtype=float)
    lo = hi = math.nan
    it = 0
    span = math.inf
    converged = False
    for it in range(1, max_iter + 1):
        q = rate_cost + rate * (model.expected_next(v) - v[:, None]) + v[:, None]
        v_new = q.min(axis=1)
        diff = v_new - v
        lo, hi = float(diff.min()), float(diff.max())
        span = hi - lo
        v = v_new - v_new[0]
        if span <= tol * max(1.0, abs(0.5 * (lo + hi))):
            converged = True
            break
    q = rate_cost + rate * (model.expected_next(v) - v[:, None])
    act_idx = np.argmin(q, axis=1)  # first minimiser, i.e. shortest duration
    actions = model.taus[act_idx]
    return SmdpSolution(Tabular(tuple(actions.tolist()), int(model.ages[0])), actions,
                        0.5 * (lo + hi), (lo, hi), v, it, span, converged,
                        model.beta, model.a_max)


# ---------------------------------------------------------------------------
# Evaluating a fixed policy
# ---------------------------------------------------------------------------

def _action_indices(model: SmdpModel, policy) -> np.ndarray:
    if isinstance(policy, SmdpSolution):
        policy = policy.policy
    if isinstance(policy, Tabular):
        acts = policy.as_array(model.ages)
    else:
        acts = np.array([policy.action(int(a)) for a in model.ages])
    return np.array([model.scenario.channel.index(t) for t in acts])


def policy_chain(model: SmdpModel, policy) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix of the embedded chain under ``policy`` and its action indices."""
    j = _action_indices(model, policy)
    eps = model.scenario.epsilon
    rows = np.arange(model.n_states)
    P = (1.0 - eps) * model.lift[model.succ_idx[j]] + eps * model.lift[model.fail_idx[rows, j]]
    return P, j


def recurrent_classes(P: np.ndarray, atol: float = 0.0) -> list[np.ndarray]:
    """Closed communicating classes of a stochastic matrix."""
    G = csr_matrix(P > atol)
    n_comp, labels = connected_components(G, directed=True, connection="strong")
    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        out = G[members].indices
        if np.all(labels[out] == c):
            closed.append(members)
    return closed


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Unique stationary distribution of a unichain stochastic matrix."""
    classes = recurrent_classes(P)
    if len(classes) != 1:
        raise ArithmeticError(f"policy chain has {len(classes)} recurrent classes")
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.where(pi < 0, 0.0, pi)
    pi /= pi.sum()
    resid = float(np.abs(pi @ P - pi).max())
    if resid > 1e-10:
        raise ArithmeticError(f"stationary residual {resid:.3g} exceeds 1e-10")
    return pi


def action_distribution(model: SmdpModel, policy) -> dict:
    """Long-run fraction of decision epochs using each duration."""
    P, j = policy_chain(model, policy)
    pi = stationary_distribution(P)
    out = np.zeros(model.taus.size)
    np.add.at(out, j, pi)
    return {int(t): float(p) for t, p in zip(model.taus, out)}


def evaluate_tabular(model: SmdpModel, policy) -> TradeoffPoint:
    """Average age and power of a deterministic stationary policy on the truncated model."""
    P, j = policy_chain(model, policy)
    pi = stationary_distribution(P)
    rows = np.arange(model.n_states)
    length = pi @ model.epoch[j]
    age = float(pi @ model.age_cost[rows, j] / length)
    power = float(pi @ model.energy[j] / length)
    pol = policy.policy if isinstance(policy, SmdpSolution) else policy
    return TradeoffPoint(age, power, "smdp", pol, model.scenario.digest(),
                         extra={"beta": model.beta, "a_max": model.a_max,
                                "gain": age + model.beta * power})


def recurrent_actions(model: SmdpModel, policy) -> list[set]:
    """Durations used inside each recurrent class of the policy chain."""
    P, j = policy_chain(model, policy)
    return [set(model.taus[j[c]].tolist()) for c in recurrent_classes(P)]


# ---------------------------------------------------------------------------
# Lagrangian sweeps
# ---------------------------------------------------------------------------

@dataclass
class FrontierPoint:
    point: TradeoffPoint
    solution: SmdpSolution


def solve_beta(model: SmdpModel, beta: float, tol=1e-8, max_iter=100_000, init=None) -> FrontierPoint:
    m = model.with_beta(beta)
    sol = value_iteration(m, tol, max_iter, init)
    return FrontierPoint(evaluate_tabular(m, sol), sol)


def sweep_beta(scenario: Scenario, betas, a_max=None, tol=1e-8, max_iter=100_000) -> list[FrontierPoint]:
    """Solve at each ``beta``; each solve is warm-started from the previous values."""
    if any(b < 0 for b in betas):
        raise ValueError("betas must be >= 0")
    base = build_model(scenario, 0.0, a_max)
    out, init = [], None
    for b in betas:
        fp = solve_beta(base, b, tol, max_iter, init)
        init = fp.solution.values
        out.append(fp)
    return out


def solve_at_power(scenario: Scenario, p_c: float, a_max=None, tol=1e-8,
                   beta_lo=1e-6, beta_hi=1e8, steps=40):
    """Bracket ``p_c`` between two Lagrangian solutions by bisection on log(beta).

    Returns ``(low, high)`` frontier points with ``low.avg_power <= p_c <=
    high.avg_power`` (``high`` may be ``None`` if even ``beta_lo`` is below
    ``p_c``; ``low`` may be ``None`` if even ``beta_hi`` exceeds it).
    """
    base = build_model(scenario, 0.0, a_max)
    p_c = p_c * (1.0 + 1e-10)  # absorb round-off at the range ends
    hi_pt = solve_beta(base, beta_lo, tol)
    if hi_pt.point.avg_power <= p_c:
        return hi_pt, None
    lo_pt = solve_beta(base, beta_hi, tol)
    if lo_pt.point.avg_power > p_c:
        return None, lo_pt
    lb, hb = math.log(beta_lo), math.log(beta_hi)
    for _ in range(steps):
        mid = 0.5 * (lb + hb)
        fp = solve_beta(base, math.exp(mid), tol, init=lo_pt.solution.values)
        if fp.point.avg_power <= p_c:
            lo_pt, hb = fp, mid
        else:
            hi_pt, lb = fp, mid
        if hb - lb < 1e-6:
            break
    return lo_pt, hi_pt


def frontier_age_at(scenario: Scenario, p_c: float, a_max=None, tol=1e-8) -> float:
    """Optimal age at power ``p_c`` by mixing the two bracketing Lagrangian policies."""
    low, high = solve_at_power(scenario, p_c, a_max, tol)
    if high is None:
        return low.point.avg_age
    if low is None:
        raise ValueError(f"p_c={p_c} is below the minimum achievable power")
    (p0, a0), (p1, a1) = (low.point.avg_power, low.point.avg_age), (high.point.avg_power, high.point.avg_age)
    if p1 == p0:
        return min(a0, a1)
    w = (p_c - p0) / (p1 - p0)
    return a0 + w * (a1 - a0)


def lower_hull(points) -> list:
    """Lower convex hull of ``(power, age)`` pairs, sorted by power."""
    pts = sorted(set((float(p), float(a)) for p, a in points))
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    # keep the decreasing part only
    best = min(range(len(hull)), key=lambda i: (hull[i][1], hull[i][0]))
    return hull[: best + 1]


def interpolate_curve(points, p_c: float) -> float:
    """Piecewise-linear age at power ``p_c`` along points sorted by power."""
    pts = sorted((float(p), float(a)) for p, a in points)
    xs = np.array([p for p, _ in pts])
    ys = np.array([a for _, a in pts])
    if p_c < xs[0] - 1e-12 * max(1.0, abs(xs[0])):
        raise ValueError(f"p_c={p_c} below curve range [{xs[0]}, {xs[-1]}]")
    return float(np.interp(p_c, xs, ys))
