"""Closed-form average age and average power for simple policy families.

Geometric conventions:

* ``G~`` on {0, 1, 2, ...} with ``P(G~ = g) = lam (1-lam)^g`` is the idle time
  between the end of a transmission and the next generation (NP model).
* Inter-generation gaps on {1, 2, ...} with mean ``1/lam`` (P model).
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (ATFixed, DivergenceError, FTT, Scenario, Threshold,
                    TradeoffPoint)


def _check_eps(eps):
    if eps >= 1.0:
        raise DivergenceError(f"epsilon={eps} >= 1: no packet is ever delivered")


def renewal_moments_np(t_s: int, lam: float, eps: float) -> tuple[float, float]:
    """First two moments of the NP-model renewal cycle length under FTT."""
    _check_eps(eps)
    wait = (1.0 - lam) / lam
    m1 = (wait + t_s) / (1.0 - eps)
    m2 = (1.0 - lam) / ((1.0 - eps) * lam ** 2) + (1.0 + eps) / (1.0 - eps) ** 2 * (wait + t_s) ** 2
    return m1, m2


def ftt_np(t_s: int, scenario: Scenario) -> TradeoffPoint:
    """Fixed-duration policy under non-preemptive generation."""
    lam, eps = scenario.lam, scenario.epsilon
    m1, m2 = renewal_moments_np(t_s, lam, eps)
    age = t_s + m2 / (2.0 * m1) - 0.5
    power = scenario.power(t_s) * t_s * lam / (1.0 - lam + lam * t_s)
    return TradeoffPoint(age, power, "analytic", FTT(t_s), scenario.digest())


def ftt_errorfree(t_s: int, scenario: Scenario) -> TradeoffPoint:
    """:func:`ftt_np` with transmission errors switched off."""
    return ftt_np(t_s, scenario.errorfree())


# ---------------------------------------------------------------------------
# Two-duration threshold policy, error-free link
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdChain:
    """Two-state embedded chain on post-delivery ages ``{tau_a, tau_b}``."""

    emc_alpha: float  # P(tau_b -> tau_a)
    emc_beta: float   # P(tau_a -> tau_b)
    pi_a: float
    pi_b: float
    age_cost: tuple   # (from tau_a, from tau_b)
    energy: tuple
    sojourn: tuple


def _geometric_split(k: int, lam: float, c: float):
    """Moments of ``L = c + G~`` split on ``G~ <= k``.

    Returns ``(p_head, head1, head2, tail1, tail2)`` where ``headj = E[L^j; G~<=k]``
    and ``tailj = E[L^j; G~>k]``. Uses memorylessness: given ``G~ > k``,
    ``G~ - (k+1)`` is again distributed as ``G~``.
    """
    q = 1.0 - lam
    g1 = q / lam
    g2 = q * (2.0 - lam) / lam ** 2

    def moments(shift):
        return shift + g1, shift * shift + 2.0 * shift * g1 + g2

    k = max(k, -1)
    p_tail = q ** (k + 1)
    full1, full2 = moments(c)
    t1, t2 = moments(c + k + 1)
    tail1, tail2 = p_tail * t1, p_tail * t2
    return 1.0 - p_tail, full1 - tail1, full2 - tail2, tail1, tail2


def threshold_chain(h: int, tau_a: int, tau_b: int, scenario: Scenario) -> ThresholdChain:
    lam = scenario.lam
    costs, energies, sojourns, p_to_a = [], [], [], []
    e_a = tau_a * scenario.power(tau_a)
    e_b = tau_b * scenario.power(tau_b)
    for s in (tau_a, tau_b):
        # from post-delivery age s the next decision age is s + G~;
        # duration tau_a is chosen iff G~ <= h - s
        pa, a1, a2, _, _ = _geometric_split(h - s, lam, tau_a)
        _, _, _, b1, b2 = _geometric_split(h - s, lam, tau_b)
        # age summed over a cycle of L slots starting at age s: s L + L(L-1)/2
        cost = s * (a1 + b1) + 0.5 * ((a2 - a1) + (b2 - b1))
        costs.append(cost)
        energies.append(pa * e_a + (1.0 - pa) * e_b)
        sojourns.append(a1 + b1)
        p_to_a.append(pa)
    alpha = p_to_a[1]
    beta = 1.0 - p_to_a[0]
    if alpha + beta == 0.0:
        # both states absorbing; only possible when tau_a == tau_b
        pi_a, pi_b = 1.0, 0.0
    else:
        pi_a, pi_b = alpha / (alpha + beta), beta / (alpha + beta)
    return ThresholdChain(alpha, beta, pi_a, pi_b, tuple(costs), tuple(energies), tuple(sojourns))


def threshold_errorfree(h: int, tau_a: int, tau_b: int, scenario: Scenario) -> TradeoffPoint:
    """Threshold policy evaluated on the error-free link.

    Used to pick parameters; for lossy links simulate instead. Equal
    durations collapse to :func:`ftt_errorfree`.
    """
    policy = Threshold(h, tau_a, tau_b)  # validates tau_a >= tau_b
    if tau_a == tau_b:
        pt = ftt_errorfree(tau_a, scenario)
        return TradeoffPoint(pt.avg_age, pt.avg_power, "analytic", policy, scenario.digest())
    ch = threshold_chain(h, tau_a, tau_b, scenario)
    w = (ch.pi_a, ch.pi_b)
    den = w[0] * ch.sojourn[0] + w[1] * ch.sojourn[1]
    age = (w[0] * ch.age_cost[0] + w[1] * ch.age_cost[1]) / den
    power = (w[0] * ch.energy[0] + w[1] * ch.energy[1]) / den
    return TradeoffPoint(age, power, "analytic", policy, scenario.digest(),
                         extra={"emc_alpha": ch.emc_alpha, "emc_beta": ch.emc_beta,
                                "pi_a": ch.pi_a, "pi_b": ch.pi_b})


# ---------------------------------------------------------------------------
# Other generation models
# ---------------------------------------------------------------------------

def preempt_alpha(t_s: int, lam: float, eps: float) -> float:
    """Probability that a transmission is neither preempted nor lost."""
    return (1.0 - eps) * (1.0 - lam) ** (t_s - 1)


def ftt_preemptive(t_s: int, scenario: Scenario) -> TradeoffPoint:
    """Fixed duration under preemptive generation: a new packet discards the one in service."""
    lam, eps = scenario.lam, scenario.epsilon
    _check_eps(eps)
    alpha = preempt_alpha(t_s, lam, eps)
    if alpha <= 0.0:
        raise DivergenceError(
            f"every transmission of {t_s} slots is preempted at lambda={lam}")
    age = 1.0 / (alpha * lam)
    power = scenario.power(t_s) * (1.0 - (1.0 - lam) ** t_s)
    return TradeoffPoint(age, power, "analytic", FTT(t_s), scenario.digest(),
                         extra={"preempt_alpha": alpha})


def ftt_age_threshold(h_a: int, t_s: int, scenario: Scenario) -> TradeoffPoint:
    """Fixed duration with generation triggered once the age reaches ``h_a``.

    Thresholds below ``t_s`` behave exactly like ``h_a = t_s``.
    """
    eps = scenario.epsilon
    _check_eps(eps)
    if h_a < 0:
        raise ValueError("h_a must be >= 0")
    d = max(h_a, t_s) - t_s  # idle slots after each delivery
    s = 1.0 - eps
    num = d * d * s * s + t_s * t_s * (1.0 + eps) + 2.0 * d * t_s * s
    den = 2.0 * s * (d * s + t_s)
    age = t_s + num / den - 0.5
    power = scenario.power(t_s) * t_s / (d * s + t_s)
    return TradeoffPoint(age, power, "analytic", ATFixed(h_a, t_s), scenario.digest())
