"""Independent reference computations used only by the tests."""

import math

import mpmath
import numpy as np


def lfp_vertex_enumeration(prob) -> float:
    """Minimum of a linear-fractional objective over ``{p >= 0, sum p = 1, load @ p <= rhs}``.

    Checks every feasible point mass and every two-point mixture with the
    budget tight; these are all the vertices of the feasible set.
    """
    slack = prob.rhs - prob.load
    # treat round-off on a tight budget as tight
    slack = np.where(np.abs(slack) <= 1e-12 * max(1.0, abs(prob.rhs)), 0.0, slack)
    best = math.inf
    n = slack.size
    for i in range(n):
        if slack[i] >= 0:
            best = min(best, prob.num[i] / (prob.den[i] + prob.wait))
        for j in range(n):
            if slack[i] > 0 > slack[j]:
                w = slack[i] / (slack[i] - slack[j])
                num = (1 - w) * prob.num[i] + w * prob.num[j]
                den = (1 - w) * prob.den[i] + w * prob.den[j] + prob.wait
                best = min(best, num / den)
    return best


def q_mp(x):
    return 0.5 * mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2))


def awgn_cd_mp(snr):
    snr = mpmath.mpf(snr)
    log2e = 1 / mpmath.log(2)
    return 0.5 * mpmath.log(1 + snr, 2), log2e ** 2 / 2 * (1 - (1 + snr) ** -2)


def age_sum_bruteforce(ages_start, lengths):
    """Sum of a sawtooth age over explicit slots."""
    total = 0
    for a, n in zip(ages_start, lengths):
        total += sum(a + k for k in range(n))
    return total


def geometric_partial(k, lam, fn, n_terms=20000):
    """E[fn(G); G <= k] and E[fn(G); G > k] by direct summation."""
    head = tail = 0.0
    for g in range(n_terms):
        w = lam * (1 - lam) ** g
        if g <= k:
            head += w * fn(g)
        else:
            tail += w * fn(g)
    return head, tail


def stationary_by_power_iteration(P, tol=1e-14, max_iter=10**6):
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    Pl = 0.5 * (P + np.eye(P.shape[0]))  # lazy chain, same stationary law
    for _ in range(max_iter):
        nxt = pi @ Pl
        if np.abs(nxt - pi).max() < tol:
            return nxt
        pi = nxt
    return pi
