"""
Online pricing versus first-fit greedy
======================================

A cheap request that spans a whole path arrives first.  Valuable single-hop
requests follow.  Greedy admission locks the path with the cheap request;
the pricing engine keeps room for what comes next.
"""

# %%
from gvop import GVOP, AggregateIngress, RoutingModel, SubstrateNetwork, VNetRequest
from gvop.harness import greedy_baseline
from gvop.offline import offline_fractional_opt

hops = 4
nodes = [f"p{i}" for i in range(hops + 1)]
net = SubstrateNetwork.build(nodes, [(nodes[i], nodes[i + 1], 1) for i in range(hops)])


def request(j, terms, benefit):
    return VNetRequest(j, frozenset(terms), AggregateIngress(1), RoutingModel.TREE, benefit)


sequence = [request(1, [nodes[0], nodes[-1]], 1)]
sequence += [request(j + 2, nodes[j:j + 2], 10) for j in range(hops)]

# %%
greedy = greedy_baseline(net, sequence)
engine = GVOP(net)
engine.run(sequence)
opt = offline_fractional_opt(net, sequence)

print(f"offline optimum   {opt.value:6.2f}")
print(f"greedy benefit    {greedy.benefit:6.2f}  accepted {greedy.accepted}")
print(f"engine benefit    {engine.dual_value():6.2f}  accepted {sorted(engine.state.accepted)}")
print(f"engine congestion {engine.congestion_report().max:6.2f}  "
      f"(bound {engine.effective_beta():.2f})")

# %%
# The same comparison on random planted instances with a tight capacity
# budget.  The engine overloads links by at most the reported factor and
# stays close to the planted optimum.
from gvop.harness import PlantedParams, generate_planted_instance, random_topology

for seed in range(5):
    topo = random_topology(15, 24, seed)
    inst = generate_planted_instance(topo, seed, PlantedParams(
        num_requests=60, k=3, ingress=1, benefit_range=(1, 20),
        capacity_factor=0.1, min_capacity=1))
    eng = GVOP(inst.net)
    eng.run(inst.requests)
    g = greedy_baseline(inst.net, inst.requests, "load-ratio")
    print(f"seed {seed}: planted {inst.planted_optimum:7.1f}  greedy {g.benefit:7.1f}  "
          f"engine {eng.dual_value():7.1f}  congestion {eng.congestion_report().max:.2f}")
