"""With saturated arrivals and no errors, alternating two durations can win.

At lambda = 1 the age seen at each decision equals the last duration, so a
long packet sent right after a short one starts from a small age.  The
solver finds a 24/105 cycle at beta = 10 that beats every fixed duration.

Run: python3 demos/saturated_alternation.py
"""

from aoi_lab.channel import ChannelModel
from aoi_lab.model import Scenario
from aoi_lab.smdp import build_model, recurrent_actions, value_iteration


def main():
    ch = ChannelModel.normal_approx(8, 10.0, 0.01, 24, 138)
    sc = Scenario(1.0, 0.0, ch)
    base = build_model(sc, 0.0)
    for beta in (0.0, 1.0, 10.0, 1e3, 1e6):
        m = base.with_beta(beta)
        sol = value_iteration(m, tol=1e-12)
        best_fixed = min((3 * t - 1) / 2 + beta * ch.power(int(t)) for t in ch.taus)
        used = [sorted(c) for c in recurrent_actions(m, sol)]
        print(f"beta={beta:<8g} gain {sol.gain:12.4f}  best fixed {best_fixed:12.4f}  recurrent {used}")


if __name__ == "__main__":
    main()
