"""
Never overloading a link
========================

Running the engine on capacities divided by the congestion bound keeps every
original capacity intact, at the price of admitting fewer requests.
"""

# %%
from gvop.harness import (ExperimentConfig, PlantedParams, a_priori_beta,
                          generate_planted_instance, random_topology, run_instance)

topo = random_topology(12, 20, seed=1)
params = PlantedParams(num_requests=80, k=3, ingress=1, benefit_range=(1, 10), min_capacity=10,
                       capacity_factor=0.1)
inst = generate_planted_instance(topo, 1, params)
beta = a_priori_beta(inst.net, inst.requests)
print(f"scale factor {beta:.2f}, smallest capacity {min(inst.net.edge_capacity):.0f}")

# %%
for mode in ("plain", "scaled", "fractional"):
    report, engine = run_instance(inst.net, inst.requests, ExperimentConfig(mode=mode))
    extra = f"  fractional benefit {report.fractional_benefit:.1f}" if mode == "fractional" else ""
    print(f"{mode:10s} accepted {report.accepted:3d}  benefit {report.benefit:6.1f}  "
          f"congestion {report.max_congestion:.3f}{extra}")
