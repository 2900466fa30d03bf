"""One drop of the default desk-scale network, end to end.

Draws a 4-cell scenario, builds the correlation matrices, compares the
pilot assigners at fixed powers and then balances the powers of the joint
assignment.
"""

import numpy as np

from mimopilot import (PowerAllocation, SystemConfig, build_statistics, coupling, estimation_stats,
                       generate_scenario, greedy_assignment, joint_assignment, maxmin_power,
                       random_assignment, single_direction_assignment)
from mimopilot.assignment import Objective
from mimopilot.se import DL, UL, report_from_coupling

config = SystemConfig()  # L=4, K=4, M=32 on a 0.5 km^2 torus
scenario = generate_scenario(config, seed=7)
stats = build_statistics(scenario)
print("serving distances (km):")
print(np.round(scenario.distance[np.arange(4), :, np.arange(4)], 3))

powers = PowerAllocation.fixed(config)
objective = Objective(stats, config, powers)

# every assigner starts from (or is compared against) the same random draw
initial = random_assignment(config, seed=1)
joint, trace = joint_assignment(config, stats, powers, initial=initial, objective=objective)
ul, _ = single_direction_assignment(config, stats, powers, "ul", initial=initial)
dl, _ = single_direction_assignment(config, stats, powers, "dl", initial=initial)
candidates = {"random": initial, "greedy": greedy_assignment(config, stats),
              "ul_only": ul, "dl_only": dl, "joint": joint}

print(f"\njoint assigner: {trace.iterations} outer iterations, status {trace.status}")
print("objective per iteration:", np.round(trace.per_iteration(), 4))

print("\nnetwork-minimum UL+DL SE (b/s/Hz) at fixed powers:")
for name, pilots in candidates.items():
    print(f"  {name:8s} {objective(pilots):.4f}")

# max-min power control, UL and DL solved separately
c = coupling(stats, estimation_stats(stats, joint), joint)
pc_ul = maxmin_power(UL, c, config)
pc_dl = maxmin_power(DL, c, config)
balanced = PowerAllocation(p_ul=pc_ul.p, p_dl=pc_dl.p)
report = report_from_coupling(c, joint, balanced, config)
print(f"\nwith power control: xi_ul={pc_ul.xi_star:.4f}, xi_dl={pc_dl.xi_star:.4f}, "
      f"min f={report.min_f:.4f}")
print(report.to_csv())
