"""
Routing tables, round robin and the device agent
=================================================

Two edge datacenters host instances of the same abstract MEL. Without a rule
a device alternates between them; the device agent's plan turns datacenter
messages into a rule for the instance whose host reports the most sun.
"""

from collections import Counter

from osmores.agents import AgentMessage, MessageContent, device_agent_plan, plan_alg4, plan_alg5
from osmores.topology import AbstractMel, Datacenter, IoTDevice, MelInstance, Topology, haversine_km

berlin, paris = (52.52, 13.40), (48.8, 2.30)
print("Berlin to Paris: %.1f km" % haversine_km(berlin, paris))

topo = Topology()
topo.add_datacenter(Datacenter("berlin", "edge", berlin))
topo.add_datacenter(Datacenter("paris", "edge", paris))
topo.add_abstract(AbstractMel("MEL_EDGE", 5))
topo.deploy(MelInstance("MEL_EDGE.1", "berlin"))
topo.deploy(MelInstance("MEL_EDGE.2", "paris"))
cam = topo.add_device(IoTDevice("cam1", berlin))

# no rule yet: round robin in instance-id order
print(Counter(topo.resolve(cam, "MEL_EDGE.*") for _ in range(9)))

# what the two DC agents would publish around noon
def note(dc, instance, r, e_re, full, p_low, where):
    payload = dict(kind="edge", e_re=e_re, self_consumption=full, p_low=p_low, location=where)
    return AgentMessage("dc:" + dc, ("dev:cam1",), MessageContent(r, (instance,), payload))

noon = [note("berlin", "MEL_EDGE.1", 310, 6.2, 0.4, 0.5, berlin),
        note("paris", "MEL_EDGE.2", 720, 14.4, 0.9, 0.9, paris)]
print("max r plan:", device_agent_plan(noon))
print("ALG4 plan:", plan_alg4(noon, cam))

night = [note("berlin", "MEL_EDGE.1", 0, 0, 0, 0.5, berlin), note("paris", "MEL_EDGE.2", 0, 0, 0, 0.9, paris)]
print("ALG4 at night:", plan_alg4(night, cam))
print("ALG5 at night:", plan_alg5(night, cam))

topo.routing_add(cam, "MEL_EDGE", plan_alg4(noon, cam)["MEL_EDGE"].instance)
print("after routing_add:", [topo.resolve(cam, "MEL_EDGE") for _ in range(3)])
