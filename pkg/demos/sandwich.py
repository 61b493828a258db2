"""Print the lower bounds, the SMDP frontier and the fixed-duration sweep side by side.

Run: python3 demos/sandwich.py
"""

from aoi_lab.bounds import analytical_lower_bound, numerical_lower_bound, power_grid
from aoi_lab.channel import ChannelModel
from aoi_lab.model import Scenario
from aoi_lab.optimize import ftt_sweep
from aoi_lab.smdp import frontier_age_at, interpolate_curve


def main():
    ch = ChannelModel.normal_approx(8, 10.0, 0.01, 24, 138)
    sc = Scenario(0.1, 0.01, ch, "NP")
    ftt = [(p.avg_power, p.avg_age) for p in ftt_sweep(sc)]
    print(f"{'power':>8} {'A_l':>8} {'A_n':>8} {'smdp':>8} {'fixed':>8}")
    for pc in power_grid(sc, 8):
        row = (analytical_lower_bound(sc, pc).value, numerical_lower_bound(sc, pc).value,
               frontier_age_at(sc, pc), interpolate_curve(ftt, pc))
        print(f"{pc:8.3f} " + " ".join(f"{v:8.2f}" for v in row))


if __name__ == "__main__":
    main()
