"""Physical network model, instance loaders and shortest-path helpers."""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

INF = math.inf


class ValidationError(ValueError):
    """Raised when an instance violates a model invariant."""


class EdgeResource(NamedTuple):
    index: int


class NodeResource(NamedTuple):
    node: str


ResourceId = EdgeResource | NodeResource  # type: ignore[valid-type]


@dataclass(frozen=True)
class SubstrateNetwork:
    """Undirected capacitated graph.

    ``node_capacity`` holds ``math.inf`` for routers whose load is not modelled.
    Edges are addressed by their position in ``edges``.
    """

    nodes: Tuple[str, ...]
    node_capacity: Mapping[str, float]
    edges: Tuple[Tuple[str, str], ...]
    edge_capacity: Tuple[float, ...]
    _index: Dict[Tuple[str, str], int] = field(init=False, repr=False, compare=False)
    _adj: Dict[str, List[Tuple[str, int]]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        adj: Dict[str, List[Tuple[str, int]]] = {v: [] for v in self.nodes}
        for i, (u, v) in enumerate(self.edges):
            index[(u, v)] = i
            index[(v, u)] = i
            adj[u].append((v, i))
            adj[v].append((u, i))
        for v in adj:
            adj[v].sort()
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_adj", adj)

    @classmethod
    def build(cls, nodes, edges, check: bool = True) -> "SubstrateNetwork":
        """Create a network from ``nodes`` and ``(u, v, capacity)`` triples.

        ``nodes`` is either an iterable of ids or a mapping id -> capacity
        (``None`` meaning unbounded).
        """
        if isinstance(nodes, Mapping):
            caps = {str(v): (INF if c is None else float(c)) for v, c in nodes.items()}
        else:
            caps = {str(v): INF for v in nodes}
        edge_list = [(str(u), str(v)) for u, v, _ in edges]
        edge_caps = [float(c) for _, _, c in edges]
        if check:
            _check(caps, edge_list, edge_caps)
        return cls(tuple(caps), caps, tuple(edge_list), tuple(edge_caps))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def has_node(self, v) -> bool:
        return v in self.node_capacity

    def edge_id(self, u: str, v: str) -> int:
        return self._index[(u, v)]

    def neighbors(self, v: str) -> List[Tuple[str, int]]:
        """``(neighbor, edge index)`` pairs sorted by neighbor id."""
        return self._adj[v]

    def capacity(self, r) -> float:
        if isinstance(r, EdgeResource):
            return self.edge_capacity[r.index]
        return self.node_capacity[r.node]

    def scaled(self, factor: float) -> "SubstrateNetwork":
        """Copy with every capacity divided by ``factor`` (no invariant check)."""
        caps = {v: c / factor for v, c in self.node_capacity.items()}
        return SubstrateNetwork(self.nodes, caps, self.edges,
                                tuple(c / factor for c in self.edge_capacity))

    def with_edge_capacities(self, capacities: Sequence[float]) -> "SubstrateNetwork":
        net = SubstrateNetwork(self.nodes, dict(self.node_capacity), self.edges,
                               tuple(float(c) for c in capacities))
        _check(net.node_capacity, list(net.edges), list(net.edge_capacity))
        return net

    def to_dict(self) -> dict:
        nodes = []
        for v in self.nodes:
            c = self.node_capacity[v]
            nodes.append({"id": v} if math.isinf(c) else {"id": v, "capacity": c})
        edges = [{"u": u, "v": v, "capacity": c}
                 for (u, v), c in zip(self.edges, self.edge_capacity)]
        return {"nodes": nodes, "edges": edges}


def _check(node_caps, edges, edge_caps):
    for v, c in node_caps.items():
        if not c >= 1:
            raise ValidationError(f"node {v!r}: capacity {c} below 1")
    seen = set()
    for (u, v), c in zip(edges, edge_caps):
        if u not in node_caps or v not in node_caps:
            raise ValidationError(f"edge ({u!r}, {v!r}): unknown endpoint")
        if u == v:
            raise ValidationError(f"edge ({u!r}, {v!r}): self-loop")
        key = frozenset((u, v))
        if key in seen:
            raise ValidationError(f"edge ({u!r}, {v!r}): duplicate edge")
        seen.add(key)
        if not c >= 1:
            raise ValidationError(f"edge ({u!r}, {v!r}): capacity {c} below 1")


def load_substrate(text: str) -> SubstrateNetwork:
    """Parse a JSON instance document ``{"nodes": [...], "edges": [...]}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed instance document: {exc}") from exc
    try:
        nodes = {}
        for rec in doc["nodes"]:
            nid = str(rec["id"])
            if nid in nodes:
                raise ValidationError(f"duplicate node {nid!r}")
            nodes[nid] = rec.get("capacity")
        edges = [(rec["u"], rec["v"], rec["capacity"]) for rec in doc["edges"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed instance document: missing {exc}") from exc
    return SubstrateNetwork.build(nodes, edges)


def dump_substrate(net: SubstrateNetwork) -> str:
    return json.dumps(net.to_dict(), indent=1)


def load_edge_list(text: str, default_capacity: float = 1.0) -> SubstrateNetwork:
    """Read ``u v [capacity]`` lines (``#`` comments allowed).

    Parallel links are merged by summing capacities and self-loops are
    dropped, which is what public router-level topologies need.
    """
    caps: Dict[frozenset, float] = {}
    order: List[Tuple[str, str]] = []
    nodes: Dict[str, None] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValidationError(f"line {lineno}: expected 'u v [capacity]'")
        u, v = parts[0], parts[1]
        c = float(parts[2]) if len(parts) == 3 else default_capacity
        nodes.setdefault(u)
        nodes.setdefault(v)
        if u == v:
            continue
        key = frozenset((u, v))
        if key not in caps:
            order.append((u, v))
            caps[key] = 0.0
        caps[key] += c
    return SubstrateNetwork.build(list(nodes), [(u, v, caps[frozenset((u, v))]) for u, v in order])


def dijkstra(net: SubstrateNetwork, source: str, weight, allowed_edges=None,
             node_weight=None, allowed_nodes=None):
    """Single-source shortest paths with deterministic tie-breaking.

    ``weight`` maps edge index -> nonnegative length (a sequence or a mapping);
    ``node_weight`` (optional) is charged on entering a node.  Among
    equal-length paths the one with fewer hops wins, then the lexicographically
    smaller node sequence.  Returns ``(dist, paths)`` where ``paths[v]`` is the
    node tuple from ``source`` to ``v``.
    """
    dist = {source: 0.0}
    paths = {source: (source,)}
    done = set()
    heap = [(0.0, 1, (source,))]
    while heap:
        d, _, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        for v, ei in net.neighbors(u):
            if v in done or (allowed_edges is not None and ei not in allowed_edges):
                continue
            if allowed_nodes is not None and v not in allowed_nodes:
                continue
            nd = d + weight[ei]
            if node_weight is not None:
                nd += node_weight.get(v, 0.0)
            cand = path + (v,)
            old = dist.get(v)
            if old is None or (nd, len(cand), cand) < (old, len(paths[v]), paths[v]):
                dist[v] = nd
                paths[v] = cand
                heapq.heappush(heap, (nd, len(cand), cand))
    return dist, paths


def path_edges(net: SubstrateNetwork, path: Sequence[str]) -> List[int]:
    return [net.edge_id(a, b) for a, b in zip(path, path[1:])]


def shortest_path_closure(net: SubstrateNetwork, weights, terminals: Iterable[str],
                          allowed_edges=None):
    """Metric closure restricted to ``terminals``.

    Returns ``(closure, paths)``: ``closure[(s, t)]`` is the shortest s-t
    distance (``inf`` when unreachable) and ``paths[(s, t)]`` the realizing
    node sequence (absent when unreachable).  Both orientations are stored.
    """
    terms = sorted(set(terminals))
    closure: Dict[Tuple[str, str], float] = {}
    paths: Dict[Tuple[str, str], Tuple[str, ...]] = {}
    for i, s in enumerate(terms):
        dist, sp = dijkstra(net, s, weights, allowed_edges)
        for t in terms[i + 1:]:
            if t in dist:
                closure[(s, t)] = closure[(t, s)] = dist[t]
                paths[(s, t)] = sp[t]
                paths[(t, s)] = tuple(reversed(sp[t]))
            else:
                closure[(s, t)] = closure[(t, s)] = INF
    return closure, paths


def connected(net: SubstrateNetwork, terminals: Iterable[str], allowed_edges=None,
              allowed_nodes=None) -> bool:
    terms = list(terminals)
    if not terms:
        return True
    if allowed_nodes is not None and any(t not in allowed_nodes for t in terms):
        return False
    seen = {terms[0]}
    stack = [terms[0]]
    while stack:
        u = stack.pop()
        for v, ei in net.neighbors(u):
            if v in seen:
                continue
            if allowed_edges is not None and ei not in allowed_edges:
                continue
            if allowed_nodes is not None and v not in allowed_nodes:
                continue
            seen.add(v)
            stack.append(v)
    return all(t in seen for t in terms)


class UnionFind:
    def __init__(self, items=()):
        self.parent = {x: x for x in items}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True
