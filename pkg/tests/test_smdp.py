import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aoi_lab import analytic
from aoi_lab.channel import ChannelModel
from aoi_lab.model import FTT, Scenario, Tabular
from aoi_lab.optimize import ftt_sweep
from aoi_lab.smdp import (action_distribution, build_model, default_a_max,
                          evaluate_tabular, frontier_age_at, interpolate_curve,
                          lower_hull, policy_chain, recurrent_actions,
                          recurrent_classes, solve_at_power, stationary_distribution,
                          sweep_beta, value_iteration)
from oracles import stationary_by_power_iteration


def tiny(lam=0.4, eps=0.2):
    ch = ChannelModel.from_table([1, 2, 3], [9.0, 3.5, 2.0])
    return Scenario(lam, eps, ch)


@pytest.fixture(scope="module")
def ref_model(ref_scenario):
    return build_model(ref_scenario, 0.0)


def test_errorfree_kernel_row_is_shifted_geometric():
    sc = tiny(0.3, 0.0)
    m = build_model(sc, 0.0, a_max=40)
    row = m.kernel_row(7, 2)
    ages = m.ages
    for a, p in zip(ages[:-1], row[:-1]):
        expect = 0.3 * 0.7 ** (a - 2) if a >= 2 else 0.0
        assert p == pytest.approx(expect, abs=1e-15)
    assert row[-1] == pytest.approx(0.7 ** (40 - 2), rel=1e-12)


@settings(max_examples=100)
@given(st.integers(0, 400), st.integers(24, 138))
def test_kernel_rows_are_distributions(ref_model, a, tau):
    row = ref_model.kernel_row(a, tau)
    assert np.all(row >= 0)
    assert row.sum() == pytest.approx(1.0, abs=1e-9)


def test_cost_reduces_without_waiting_or_errors():
    m = build_model(tiny(1.0, 0.0), 0.0, a_max=10)
    a = m.ages[:, None]
    t = m.taus[None, :]
    assert np.allclose(m.cost, a * t + (t - 1) * t / 2, rtol=0, atol=1e-12)


def test_default_truncation(ref_scenario):
    assert default_a_max(ref_scenario) == 138 + 200
    with pytest.raises(ValueError):
        build_model(ref_scenario, 0.0, a_max=138)
    with pytest.raises(ValueError):
        build_model(ref_scenario.with_(model="P"), 0.0)


@pytest.mark.parametrize("lam, eps, beta", [(0.4, 0.2, 0.0), (0.4, 0.2, 0.6), (0.9, 0.0, 0.3),
                                           (0.2, 0.5, 2.0), (0.4, 0.2, 50.0)])
def test_value_iteration_matches_policy_enumeration(lam, eps, beta):
    sc = tiny(lam, eps)
    m = build_model(sc, beta, a_max=8)
    sol = value_iteration(m, tol=1e-12)
    best = np.inf
    for acts in itertools.product([1, 2, 3], repeat=m.n_states):
        pt = evaluate_tabular(m, Tabular(acts, int(m.ages[0])))
        best = min(best, pt.extra["gain"])
    assert sol.converged
    assert sol.gain == pytest.approx(best, rel=1e-9)
    assert evaluate_tabular(m, sol).extra["gain"] == pytest.approx(best, rel=1e-9)


def test_gain_bounds_bracket(ref_model):
    sol = value_iteration(ref_model.with_beta(3.0), tol=1e-9)
    lo, hi = sol.gain_bounds
    assert lo <= sol.gain <= hi
    assert hi - lo <= 1e-9 * max(1.0, abs(sol.gain))


def test_endpoints(ref_model):
    s0 = value_iteration(ref_model.with_beta(0.0))
    s1 = value_iteration(ref_model.with_beta(1e6))
    assert set(s0.actions.tolist()) == {24}
    assert set(s1.actions.tolist()) == {138}


def test_tabular_ftt_reproduces_closed_form(ref_model, ref_scenario):
    for t in (24, 60, 138):
        pt = evaluate_tabular(ref_model, FTT(t))
        ref = analytic.ftt_np(t, ref_scenario)
        assert pt.avg_age == pytest.approx(ref.avg_age, rel=5e-3)
        assert pt.avg_power == pytest.approx(ref.avg_power, rel=1e-12)


@settings(max_examples=5, deadline=None)
@given(st.lists(st.integers(24, 138), min_size=315, max_size=315), st.floats(0, 100))
def test_gain_decomposition_identity(ref_model, acts, beta):
    m = ref_model.with_beta(beta)
    pol = Tabular(tuple(acts), 24)
    pt = evaluate_tabular(m, pol)
    P, j = policy_chain(m, pol)
    pi = stationary_distribution(P)
    rows = np.arange(m.n_states)
    direct = (pi @ m.cost[rows, j]) / (pi @ m.epoch[j])
    assert pt.extra["gain"] == pytest.approx(direct, rel=1e-10)
    assert pt.avg_age + beta * pt.avg_power == pytest.approx(direct, rel=1e-10)


def test_stationary_against_power_iteration(ref_model):
    rng = np.random.default_rng(3)
    for _ in range(3):
        pol = Tabular(tuple(rng.integers(24, 139, ref_model.n_states)), 24)
        P, _ = policy_chain(ref_model, pol)
        assert np.allclose(stationary_distribution(P), stationary_by_power_iteration(P), atol=1e-10)


def test_recurrent_classes_and_multichain_rejection():
    P = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    classes = sorted(c.tolist() for c in recurrent_classes(P))
    assert classes == [[0], [1, 2]]
    with pytest.raises(ArithmeticError):
        stationary_distribution(P)
    Q = np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    assert [c.tolist() for c in recurrent_classes(Q)] == [[1, 2]]


def test_action_distribution_sums_to_one(ref_model):
    sol = value_iteration(ref_model.with_beta(5.0))
    dist = action_distribution(ref_model, sol)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)


def test_frontier_monotone_and_below_ftt(ref_scenario):
    betas = (0.0, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1e6)
    front = sweep_beta(ref_scenario, betas)
    pw = [f.point.avg_power for f in front]
    ag = [f.point.avg_age for f in front]
    assert all(b <= a + 1e-12 for a, b in zip(pw, pw[1:]))
    assert all(b >= a - 1e-9 for a, b in zip(ag, ag[1:]))
    ftt = [(p.avg_power, p.avg_age) for p in ftt_sweep(ref_scenario)]
    for f in front:
        assert f.point.avg_age <= interpolate_curve(ftt, f.point.avg_power) * (1 + 5e-3)


def test_truncation_stability(ref_scenario):
    a = sweep_beta(ref_scenario, [1.0])[0].point
    b = sweep_beta(ref_scenario, [1.0], a_max=2 * default_a_max(ref_scenario))[0].point
    assert b.avg_age == pytest.approx(a.avg_age, rel=5e-3)
    assert b.avg_power == pytest.approx(a.avg_power, rel=5e-3)


def test_lambda_one_errorfree_endpoint_weights_are_constant():
    sc = Scenario(1.0, 0.0, ChannelModel.normal_approx(8, 10.0, 0.01, 24, 138))
    for beta in (0.0, 1.0, 1e3, 1e6):
        sol = value_iteration(build_model(sc, beta))
        assert len(set(sol.actions.tolist())) == 1


def test_lambda_one_errorfree_alternation_beats_every_fixed_duration():
    # with lambda = 1 the decision age is the previous duration, so a long
    # transmission after a short one starts from a low age
    ch = ChannelModel.normal_approx(8, 10.0, 0.01, 24, 138)
    sc = Scenario(1.0, 0.0, ch)
    m = build_model(sc, 10.0)
    sol = value_iteration(m, tol=1e-12)
    (cls,) = recurrent_actions(m, sol)
    assert cls == {24, 105}
    t1, t2 = 24, 105
    age = (2 * t1 * t2 + t1 * (t1 - 1) / 2 + t2 * (t2 - 1) / 2) / (t1 + t2)
    power = (t1 * ch.power(t1) + t2 * ch.power(t2)) / (t1 + t2)
    assert sol.gain == pytest.approx(age + 10 * power, rel=1e-9)
    best_ftt = min((3 * t - 1) / 2 + 10 * ch.power(int(t)) for t in ch.taus)
    assert sol.gain < best_ftt - 5.0
    # time sharing between fixed durations cannot reach it either
    hull = lower_hull([(ch.power(int(t)), (3 * t - 1) / 2) for t in ch.taus])
    assert age < interpolate_curve(hull, power) - 5.0


def test_solve_at_power_brackets(ref_scenario):
    lo, hi = solve_at_power(ref_scenario, 8.0)
    assert lo.point.avg_power <= 8.0 <= hi.point.avg_power
    age = frontier_age_at(ref_scenario, 8.0)
    assert min(lo.point.avg_age, hi.point.avg_age) <= age <= max(lo.point.avg_age, hi.point.avg_age)


def test_lower_hull_and_interpolation():
    pts = [(0, 10), (1, 6), (2, 5), (3, 1), (4, 1.5)]
    assert lower_hull(pts) == [(0.0, 10.0), (1.0, 6.0), (3.0, 1.0)]
    assert interpolate_curve(pts, 0.5) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        interpolate_curve(pts, -1.0)
