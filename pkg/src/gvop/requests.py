"""Online VNet requests: traffic specs, routing models, embeddings."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from .substrate import EdgeResource, NodeResource, SubstrateNetwork, ValidationError


class UnsupportedModelError(ValidationError):
    """The (traffic, routing) pair has no embedding oracle."""


class RoutingModel(enum.Enum):
    MULTIPATH = "multipath"
    SINGLE_PATH = "single_path"
    TREE = "tree"


@dataclass(frozen=True)
class CustomerPipe:
    """Fixed traffic matrix, ``demands[(s, t)]`` in bandwidth units."""

    demands: Mapping[Tuple[str, str], float]

    kind = "customer_pipe"

    def commodities(self) -> List[Tuple[str, str, float]]:
        return [(s, t, d) for (s, t), d in sorted(self.demands.items()) if d > 0]


@dataclass(frozen=True)
class Hose:
    """Per-terminal ingress/egress caps."""

    b_in: Mapping[str, float]
    b_out: Mapping[str, float]

    kind = "hose"


@dataclass(frozen=True)
class AggregateIngress:
    ingress: float

    kind = "aggregate_ingress"


TrafficSpec = CustomerPipe | Hose | AggregateIngress  # type: ignore[valid-type]

SUPPORTED = {
    ("aggregate_ingress", RoutingModel.TREE),
    ("aggregate_ingress", RoutingModel.SINGLE_PATH),
    ("hose", RoutingModel.TREE),
    ("customer_pipe", RoutingModel.MULTIPATH),
}


@dataclass(frozen=True)
class VNetRequest:
    """One online arrival.

    ``benefit`` is the total revenue for serving the request over its whole
    duration; callers pricing per slot multiply by ``len(slots)`` themselves.
    """

    id: int
    terminals: FrozenSet[str]
    traffic: TrafficSpec
    routing: RoutingModel
    benefit: float
    slots: FrozenSet[int] = frozenset({0})
    packet_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terminals", frozenset(str(t) for t in self.terminals))
        object.__setattr__(self, "slots", frozenset(int(t) for t in self.slots))

    @property
    def arrival(self) -> int:
        return min(self.slots)

    @property
    def duration(self) -> int:
        return len(self.slots)

    @property
    def model(self):
        return (self.traffic.kind, self.routing)


@dataclass
class Embedding:
    """One column of the constraint matrix: reservations per resource."""

    edge_reservation: Dict[int, float]
    node_usage: Dict[str, float] = field(default_factory=dict)
    commodity_flows: Optional[Dict[Tuple[str, str], List[Tuple[Tuple[str, ...], float]]]] = None

    def entries(self):
        """Yield ``(resource, amount)`` for the nonzero entries."""
        for e, a in sorted(self.edge_reservation.items()):
            if a > 0:
                yield EdgeResource(e), a
        for v, a in sorted(self.node_usage.items()):
            if a > 0:
                yield NodeResource(v), a

    def total(self) -> float:
        return sum(a for _, a in self.entries())

    def cost(self, prices) -> float:
        """Price-cost under ``EffectivePrices``-like ``prices``."""
        g = 0.0
        for e, a in sorted(self.edge_reservation.items()):
            g += a * prices.edge_price.get(e, 0.0)
        for v, a in sorted(self.node_usage.items()):
            g += a * prices.node_price.get(v, 0.0)
        return g

    def tree_edges(self) -> List[int]:
        return sorted(e for e, a in self.edge_reservation.items() if a > 0)


def validate_request(net: SubstrateNetwork, req: VNetRequest) -> None:
    """Raise ``ValidationError`` naming the first violated invariant.

    Structurally valid requests whose (traffic, routing) pair has no oracle
    raise ``UnsupportedModelError``.
    """
    if req.id < 1:
        raise ValidationError("request id must be a positive integer")
    if len(req.terminals) < 2:
        raise ValidationError("fewer than two terminals")
    missing = sorted(t for t in req.terminals if not net.has_node(t))
    if missing:
        raise ValidationError(f"terminals not in substrate: {missing}")
    if not req.benefit >= 1:
        raise ValidationError("benefit below 1")
    if not req.slots:
        raise ValidationError("empty duration")
    if not req.packet_rate >= 0:
        raise ValidationError("negative packet rate")
    tr = req.traffic
    if isinstance(tr, AggregateIngress):
        if not tr.ingress >= 1:
            raise ValidationError("aggregate ingress below 1")
    elif isinstance(tr, Hose):
        if set(tr.b_in) != req.terminals or set(tr.b_out) != req.terminals:
            raise ValidationError("hose bounds must be given for exactly the terminals")
        for v in sorted(req.terminals):
            if not (tr.b_in[v] >= 1 and tr.b_out[v] >= 1):
                raise ValidationError(f"hose bound below 1 at terminal {v!r}")
    elif isinstance(tr, CustomerPipe):
        for (s, t), d in tr.demands.items():
            if s not in req.terminals or t not in req.terminals:
                raise ValidationError(f"demand ({s!r}, {t!r}) between non-terminals")
            if s == t and d != 0:
                raise ValidationError("nonzero diagonal demand")
            if not d >= 0:
                raise ValidationError("negative demand")
        if not any(d > 0 for d in tr.demands.values()):
            raise ValidationError("traffic matrix is all zero")
    else:
        raise ValidationError(f"unknown traffic spec {type(tr).__name__}")
    if req.model not in SUPPORTED:
        raise UnsupportedModelError(
            f"unsupported model: {tr.kind} traffic with {req.routing.value} routing")


def maximum_possible_load(req: VNetRequest, e=None) -> float:
    """Largest bandwidth any valid embedding of ``req`` can put on one edge."""
    tr = req.traffic
    if isinstance(tr, AggregateIngress):
        return tr.ingress
    if isinstance(tr, Hose):
        terms = sorted(req.terminals)
        if len(terms) > 16:  # loose total-volume bound
            tin = sum(tr.b_in.values())
            tout = sum(tr.b_out.values())
            return min(tout, tin) + min(tin, tout)
        # worst terminal bipartition; every tree edge induces one
        best = 0.0
        first, rest = terms[0], terms[1:]
        for mask in range(1 << len(rest)):
            a = [first] + [t for i, t in enumerate(rest) if mask >> i & 1]
            b = [t for i, t in enumerate(rest) if not mask >> i & 1]
            if b:
                best = max(best, min(sum(tr.b_out[u] for u in a), sum(tr.b_in[v] for v in b))
                           + min(sum(tr.b_in[u] for u in a), sum(tr.b_out[v] for v in b)))
        return best
    return sum(tr.demands.values())


# -- serialization ----------------------------------------------------------

def traffic_to_dict(tr) -> dict:
    if isinstance(tr, AggregateIngress):
        return {"type": tr.kind, "ingress": tr.ingress}
    if isinstance(tr, Hose):
        return {"type": tr.kind,
                "b_in": {k: tr.b_in[k] for k in sorted(tr.b_in)},
                "b_out": {k: tr.b_out[k] for k in sorted(tr.b_out)}}
    return {"type": tr.kind,
            "demands": [[s, t, d] for (s, t), d in sorted(tr.demands.items())]}


def traffic_from_dict(doc: dict):
    kind = doc.get("type")
    if kind == "aggregate_ingress":
        return AggregateIngress(float(doc["ingress"]))
    if kind == "hose":
        return Hose({str(k): float(v) for k, v in doc["b_in"].items()},
                    {str(k): float(v) for k, v in doc["b_out"].items()})
    if kind == "customer_pipe":
        return CustomerPipe({(str(s), str(t)): float(d) for s, t, d in doc["demands"]})
    raise ValidationError(f"unknown traffic type {kind!r}")


def request_to_dict(req: VNetRequest) -> dict:
    doc = {"id": req.id, "terminals": sorted(req.terminals),
           "traffic": traffic_to_dict(req.traffic), "routing": req.routing.value,
           "benefit": req.benefit, "slots": sorted(req.slots)}
    if req.packet_rate:
        doc["packet_rate"] = req.packet_rate
    return doc


def request_from_dict(doc: dict) -> VNetRequest:
    try:
        return VNetRequest(
            id=int(doc["id"]),
            terminals=frozenset(doc["terminals"]),
            traffic=traffic_from_dict(doc["traffic"]),
            routing=RoutingModel(doc.get("routing", "tree")),
            benefit=float(doc["benefit"]),
            slots=frozenset(doc.get("slots", [0])),
            packet_rate=float(doc.get("packet_rate", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed request record: {exc!r}") from exc


def load_requests(text: str) -> List[VNetRequest]:
    try:
        docs = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed request sequence: {exc}") from exc
    if not isinstance(docs, list):
        raise ValidationError("request sequence must be an array")
    return [request_from_dict(d) for d in docs]


def dump_requests(requests) -> str:
    return json.dumps([request_to_dict(r) for r in requests], indent=1)
