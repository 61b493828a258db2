"""Compare packet generation models at a low arrival rate.

Non-preemptive queueing, preemption by fresh arrivals, and generate-at-will
with an age threshold are evaluated in closed form and spot-checked by
simulation.

Run: python3 demos/generation_models.py
"""

from aoi_lab import analytic
from aoi_lab.channel import ChannelModel
from aoi_lab.model import ATFixed, FTT, Scenario
from aoi_lab.optimize import at_sweep, dominates_curve, ftt_sweep
from aoi_lab.simulate import SimConfig, simulate


def main():
    ch = ChannelModel.normal_approx(8, 10.0, 0.01, 24, 138)
    np_sc = Scenario(0.01, 0.01, ch, "NP")
    p_sc = np_sc.with_(model="P")
    at_sc = np_sc.with_(model="AT")

    for t in (24, 60, 138):
        a, p = analytic.ftt_np(t, np_sc), analytic.ftt_preemptive(t, p_sc)
        print(f"t_s={t:3d}  NP age {a.avg_age:8.2f} power {a.avg_power:.3f}   "
              f"P age {p.avg_age:8.2f} power {p.avg_power:.3f}")

    pol = ATFixed(100, 24)
    ref = analytic.ftt_age_threshold(100, 24, at_sc)
    est = simulate(SimConfig(at_sc, pol, 10 ** 6))
    print(f"AT h_a=100 t_s=24: formula {ref.avg_age:.2f}, simulated {est.avg_age:.2f} +- {est.se_age:.2f}")

    est = simulate(SimConfig(p_sc, FTT(24), 10 ** 6))
    ref = analytic.ftt_preemptive(24, p_sc)
    print(f"P t_s=24: formula {ref.avg_age:.2f}, simulated {est.avg_age:.2f} +- {est.se_age:.2f}")

    flags = dominates_curve(ftt_sweep(np_sc), at_sweep(np_sc))
    print(f"age-threshold curve at or below NP at {sum(flags)} of {len(flags)} powers")


if __name__ == "__main__":
    main()
