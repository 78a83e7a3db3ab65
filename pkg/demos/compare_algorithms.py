"""
Comparing the five adaptation algorithms
========================================

Runs the bundled summer, winter and spring scenarios under every algorithm and
prints the three sustainability metrics side by side. Cameras sit in Berlin;
the Paris grid has the larger low-carbon share.
"""

import numpy as np

from osmores.scenario import BUNDLED, parse_scenario
from osmores.simulation import Simulation, compare

algorithms = ["ALG1", "ALG2", "ALG3", "ALG4", "ALG5"]

for name in BUNDLED:
    scenario = parse_scenario(name)
    print()
    print(name, scenario.sim.start.date())
    print("%-6s %8s %8s %8s" % ("alg", "m_self", "m_low", "nearest"))
    for r in compare(scenario, algorithms):
        print("%-6s %8.3f %8.3f %8.3f" % (r.algorithm, r.m_self, r.m_low, r.nearest_edge_ratio))

# battery of the first camera through the summer day, every 3 hours
sim = Simulation(parse_scenario("paper_eval"))
sim.run()
cam = np.array([(t, c) for t, d, c, _ in sim.battery_timeline if d == "cam1"])
print()
print("cam1 charge (mAh) every 3 h:", np.round(cam[::180, 1]).astype(int))
