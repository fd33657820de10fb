"""
Admission control on a single link
==================================

Three identical requests compete for one unit-capacity link.  We watch the
link price grow with every acceptance until the third request is priced out.
"""

# %%
from gvop import GVOP, AggregateIngress, EdgeResource, RoutingModel, SubstrateNetwork, VNetRequest

net = SubstrateNetwork.build(["u", "v"], [("u", "v", 1)])
requests = [VNetRequest(j, frozenset("uv"), AggregateIngress(1), RoutingModel.TREE, benefit=2)
            for j in (1, 2, 3)]

# %%
# Each decision carries the oracle's price-cost (gamma) and the slack z that
# the engine credits to the request when it is accepted.
engine = GVOP(net)
link = EdgeResource(0)
for req in requests:
    d = engine.process(req)
    print(f"request {d.request_id}: {'accept' if d.accepted else 'reject':6s} "
          f"gamma={d.gamma:.3f} z={d.z:.3f} price={engine.state.price(link, 0):.3f}")

# %%
# Two acceptances put twice the capacity on the link.  That overload is
# bounded by the congestion factor the run reports.
print("congestion", engine.congestion_report().max)
print("bound     ", round(engine.effective_beta(), 4))
print("benefit   ", engine.dual_value(), "primal", engine.primal_value())
