"""Lower bounds on the optimal average age under an average-power budget.

* :func:`numerical_lower_bound` solves a linear-fractional program over the
  joint law ``p(tau, tau')`` of consecutive durations, linearised with the
  Charnes-Cooper substitution and solved by the in-repo simplex.
* :func:`analytical_lower_bound` is a closed form that relaxes ``tau`` to a
  real number.
* :func:`stationary_probability_caps` bounds how often any non-extreme
  duration can be used close to either end of the power range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .lp import LpInfeasible, simplex_min
from .model import InfeasibleError, Scenario


@dataclass(frozen=True)
class BoundResult:
    value: float
    method: str
    support: list = field(default_factory=list)  # (tau, tau', mass)
    extra: dict = field(default_factory=dict)


def ftt_power(scenario: Scenario, tau) -> np.ndarray:
    """Average power of fixed duration ``tau`` on the non-preemptive link."""
    lam = scenario.lam
    tau = np.asarray(tau, dtype=float)
    p = np.array([scenario.power(int(t)) for t in np.atleast_1d(tau)]).reshape(tau.shape)
    return lam * tau * p / (1.0 - lam + lam * tau)


def power_range(scenario: Scenario) -> tuple[float, float]:
    """``(P_min, P_max)``: average power of the longest and shortest fixed duration."""
    return float(ftt_power(scenario, scenario.tau_max)), float(ftt_power(scenario, scenario.tau_min))


def _grid(scenario: Scenario, stride: int) -> np.ndarray:
    taus = scenario.taus
    if stride <= 1:
        return taus
    g = taus[::stride]
    if g[-1] != taus[-1]:
        g = np.append(g, taus[-1])
    return g


@dataclass(frozen=True)
class LfpProblem:
    """Objective ``num @ p / (den @ p + wait)`` subject to ``load @ p <= rhs``, ``sum p = 1``."""

    prev: np.ndarray   # tau for each column
    cur: np.ndarray    # tau' for each column
    num: np.ndarray
    den: np.ndarray
    load: np.ndarray
    wait: float
    rhs: float

    def objective(self, p: np.ndarray) -> float:
        return float(self.num @ p / (self.den @ p + self.wait))


NUMERATORS = ("proof", "statement", "displayed")


def build_lfp(scenario: Scenario, p_c: float, stride: int = 1, numerator: str = "proof") -> LfpProblem:
    """Coefficient tables over all duration pairs ``(tau, tau')``.

    The per-pair numerator is the expected age summed over an epoch of the
    error-free companion link, whose age at a decision is ``G~ + tau``:

    * ``"proof"``: ``tau' (E[G~] + tau) + tau'(tau'-1)/2 + tau' E[G~] + E[G~(G~-1)]/2``,
      with the exact second moment of ``G~``.
    * ``"displayed"``: same first term, but the idle part written as
      ``(E[G~] + tau')(E[G~] + tau' - 1) / 2``, which replaces ``E[G~^2]`` by
      ``E[G~]^2`` and is therefore looser.
    * ``"statement"``: ``tau (E[G~] + tau')`` plus the displayed idle part.
    """
    g = _grid(scenario, stride)
    wait = scenario.mean_wait
    prev, cur = (x.ravel().astype(float) for x in np.meshgrid(g, g, indexing="ij"))
    displayed = 0.5 * (wait + cur) * (wait + cur - 1.0)
    if numerator == "proof":
        # E[G~(G~-1)]/2 = E[G~]^2 for the geometric law on {0, 1, ...}
        num = cur * (wait + prev) + cur * (cur - 1.0) / 2.0 + cur * wait + wait ** 2
    elif numerator == "displayed":
        num = cur * (wait + prev) + displayed
    elif numerator == "statement":
        num = prev * (wait + cur) + displayed
    else:
        raise ValueError(f"numerator must be one of {NUMERATORS}, got {numerator!r}")
    pw = np.array([scenario.power(int(t)) for t in cur])
    load = (pw - p_c) * cur
    return LfpProblem(prev, cur, num, cur.copy(), load, wait, p_c * wait)


def numerical_lower_bound(scenario: Scenario, p_c: float, stride: int = 1,
                          numerator: str = "proof") -> BoundResult:
    """Optimal value of the linear-fractional relaxation at power budget ``p_c``."""
    p_min = float(ftt_power(scenario, scenario.tau_max))
    if p_c < p_min * (1.0 - 1e-12):
        raise InfeasibleError(f"p_c={p_c:.6g} is below the minimum achievable power {p_min:.6g}")
    prob = build_lfp(scenario, p_c, stride, numerator)
    n = prob.num.size
    # variables (y, t) with p = y / t and t = 1 / (den @ p + wait)
    c = np.append(prob.num, 0.0)
    A_eq = np.zeros((2, n + 1))
    A_eq[0, :n] = prob.den
    A_eq[0, n] = prob.wait
    A_eq[1, :n] = 1.0
    A_eq[1, n] = -1.0
    A_ub = np.append(prob.load, -prob.rhs)[None, :]
    try:
        res = simplex_min(c, A_eq, [1.0, 0.0], A_ub, [0.0])
    except LpInfeasible as exc:
        raise InfeasibleError(f"p_c={p_c:.6g} infeasible: {exc}") from None
    y, t = res.x[:n], res.x[n]
    p = y / t
    support = [(int(prob.prev[i]), int(prob.cur[i]), float(p[i])) for i in np.flatnonzero(p > 1e-14)]
    return BoundResult(res.value, "CharnesCooper", support,
                       {"p": p, "problem": prob, "lp_value": res.value, "iterations": res.iterations})


def _continuous_power(scenario: Scenario) -> PchipInterpolator:
    return PchipInterpolator(scenario.taus.astype(float), scenario.channel.powers)


def analytical_lower_bound(scenario: Scenario, p_c: float) -> BoundResult:
    """Closed-form bound evaluated at the smallest real duration meeting ``p_c`` with FTT."""
    lam = scenario.lam
    wait = scenario.mean_wait
    lo, hi = float(scenario.tau_min), float(scenario.tau_max)
    P = _continuous_power(scenario)

    def ftt_p(x):
        return lam * x * float(P(x)) / (1.0 - lam + lam * x)

    if p_c < ftt_p(hi) * (1.0 - 1e-12):
        raise InfeasibleError(f"p_c={p_c:.6g} is below the minimum achievable power {ftt_p(hi):.6g}")
    if ftt_p(lo) <= p_c:
        tau_star = lo
    else:
        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if ftt_p(mid) <= p_c:
                b = mid
            else:
                a = mid
            if b - a < 1e-12 * hi:
                break
        tau_star = b
    c_l = 2.0 * tau_star * wait + tau_star * scenario.tau_min + tau_star * (tau_star - 1.0) / 2.0 + wait ** 2
    return BoundResult(c_l / (scenario.tau_max + wait), "Analytic", [], {"tau_star": tau_star})


def stationary_probability_caps(scenario: Scenario, delta: float, regime: str) -> dict:
    """Upper bound on the fraction of epochs using each duration.

    ``LowPower`` applies to policies with average power at most
    ``P_min + delta`` (``tau_max`` excluded); ``HighPower`` to policies with
    average power at least ``P_max - delta`` (``tau_min`` excluded).
    Caps are clipped to 1.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    wait = scenario.mean_wait
    taus = scenario.taus
    e = taus * scenario.channel.powers
    caps = {}
    if regime == "LowPower":
        ref_tau, ref_e = scenario.tau_max, e[-1]
        for t, et in zip(taus[:-1], e[:-1]):
            gap = et - ref_e
            caps[int(t)] = 1.0 if gap <= 0 else min(1.0, delta * (ref_tau + wait) / gap)
    elif regime == "HighPower":
        ref_tau, ref_e = scenario.tau_min, e[0]
        for t, et in zip(taus[1:], e[1:]):
            gap = ref_e - et
            caps[int(t)] = 1.0 if gap <= 0 else min(1.0, delta * (ref_tau + wait) / gap)
    else:
        raise ValueError(f"regime must be 'LowPower' or 'HighPower', got {regime!r}")
    return caps


def power_grid(scenario: Scenario, n: int) -> np.ndarray:
    """``n`` budgets evenly spaced over the achievable power range."""
    lo, hi = power_range(scenario)
    return np.linspace(lo, hi, n)

