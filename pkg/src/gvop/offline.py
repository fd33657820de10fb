"""Brute-force and LP optima for small instances (test and report oracles)."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import lp
from .oracles import (BudgetExceeded, DisconnectedError, enumerate_steiner_trees,
                      hose_edge_reservation, tree_nodes)
from .requests import (AggregateIngress, CustomerPipe, Embedding, Hose, RoutingModel,
                       VNetRequest, validate_request)
from .substrate import (EdgeResource, NodeResource, SubstrateNetwork, UnionFind,
                        ValidationError, connected, path_edges)

EPS = 1e-9


@dataclass
class ColumnSet:
    """Explicit valid embeddings of one request; ``truncated`` when incomplete."""

    embeddings: List[Embedding] = field(default_factory=list)
    truncated: bool = False


def _simple_paths(net: SubstrateNetwork, s: str, t: str, allowed) -> List[Tuple[str, ...]]:
    out = []

    def walk(path, seen):
        u = path[-1]
        if u == t:
            out.append(tuple(path))
            return
        for v, e in net.neighbors(u):
            if v not in seen and e in allowed:
                seen.add(v)
                path.append(v)
                walk(path, seen)
                path.pop()
                seen.discard(v)

    walk([s], {s})
    return out


def enumerate_embeddings(net: SubstrateNetwork, req: VNetRequest, budget: int = 12,
                         max_columns: int = 20000) -> ColumnSet:
    """List the valid embeddings of ``req``.

    Trees are listed with non-terminal leaves trimmed (untrimmed trees use
    strictly more of every resource, so they never matter for optima or
    covering checks).  Multipath requests list one simple path per
    commodity whose combined load fits.
    """
    tr = req.traffic
    cols = ColumnSet()
    if isinstance(tr, AggregateIngress):
        pr = req.packet_rate
        allowed = {e for e in range(net.num_edges) if net.edge_capacity[e] >= tr.ingress}
        if pr > 0:
            ok_nodes = {v for v in net.nodes if net.node_capacity[v] >= pr}
            allowed = {e for e in allowed if all(x in ok_nodes for x in net.edges[e])}
        try:
            trees = enumerate_steiner_trees(net, req.terminals, allowed, budget)
        except BudgetExceeded:
            cols.truncated = True
            return cols
        for tree in trees:
            usage = {v: pr for v in tree_nodes(net, tree)
                     if pr > 0 and net.node_capacity[v] < math.inf}
            cols.embeddings.append(Embedding({e: float(tr.ingress) for e in tree}, usage))
    elif isinstance(tr, Hose):
        try:
            trees = enumerate_steiner_trees(net, req.terminals, None, budget)
        except BudgetExceeded:
            cols.truncated = True
            return cols
        for tree in trees:
            res = {e: hose_edge_reservation(net, tree, e, req) for e in tree}
            if all(res[e] <= net.edge_capacity[e] + EPS for e in tree):
                cols.embeddings.append(Embedding(res))
    elif isinstance(tr, CustomerPipe):
        if net.num_edges > budget:
            cols.truncated = True
            return cols
        commodities = tr.commodities()
        allowed = set(range(net.num_edges))
        options = [_simple_paths(net, s, t, allowed) for s, t, _ in commodities]
        for combo in itertools.product(*options):
            load: Dict[int, float] = {}
            for (s, t, d), path in zip(commodities, combo):
                for e in path_edges(net, path):
                    load[e] = load.get(e, 0.0) + d
            if all(a <= net.edge_capacity[e] + EPS for e, a in load.items()):
                flows = {(s, t): [(p, d)] for (s, t, d), p in zip(commodities, combo)}
                cols.embeddings.append(Embedding(load, {}, flows))
            if len(cols.embeddings) >= max_columns:
                cols.truncated = True
                break
    return cols


@dataclass
class OptResult:
    value: float
    exact: bool
    y: Dict[int, float] = field(default_factory=dict)


def offline_fractional_opt(net: SubstrateNetwork, requests: Sequence[VNetRequest],
                           budget: int = 12) -> OptResult:
    """Optimal fractional packing value over all requests at once.

    Tree-routed requests use their enumerated columns; multipath customer
    pipe requests use an arc-flow formulation scaled by the served
    fraction.  ``exact`` is False when some column list was truncated (the
    value is then only a lower bound).
    """
    exact = True
    # variable layout: list of (request index, kind, payload)
    var_req: List[int] = []
    var_cols: List[Dict[Tuple[object, int], float]] = []  # (resource, slot) -> coeff
    benefit: List[float] = []
    conservation: List[Tuple[Dict[int, float], float]] = []
    fraction_var: Dict[int, int] = {}
    served_rows: Dict[int, Dict[int, float]] = {}

    def add_var(j, coeffs, b):
        var_req.append(j)
        var_cols.append(coeffs)
        benefit.append(b)
        return len(var_req) - 1

    for j, req in enumerate(requests):
        try:
            validate_request(net, req)
        except ValidationError:
            continue
        slots = sorted(req.slots)
        if isinstance(req.traffic, CustomerPipe) and req.routing is RoutingModel.MULTIPATH:
            y = add_var(j, {}, req.benefit)
            fraction_var[j] = y
            served_rows[j] = {y: 1.0}
            m = net.num_edges
            for s, t, d in req.traffic.commodities():
                arcs = {}
                for e in range(m):
                    coeff = {(EdgeResource(e), ts): 1.0 for ts in slots}
                    arcs[(e, 0)] = add_var(j, coeff, 0.0)
                    arcs[(e, 1)] = add_var(j, coeff, 0.0)
                for v in net.nodes:
                    row = {}
                    for _, e in net.neighbors(v):
                        a, _ = net.edges[e]
                        out_v, in_v = (arcs[(e, 0)], arcs[(e, 1)]) if a == v else (arcs[(e, 1)], arcs[(e, 0)])
                        row[out_v] = row.get(out_v, 0.0) + 1.0
                        row[in_v] = row.get(in_v, 0.0) - 1.0
                    if v == s:
                        row[y] = row.get(y, 0.0) - d
                    elif v == t:
                        row[y] = row.get(y, 0.0) + d
                    if row:
                        conservation.append((row, 0.0))
            continue
        cols = enumerate_embeddings(net, req, budget)
        exact = exact and not cols.truncated
        ids = []
        for emb in cols.embeddings:
            coeffs = {}
            for r, a in emb.entries():
                for ts in slots:
                    coeffs[(r, ts)] = a
            ids.append(add_var(j, coeffs, req.benefit))
        served_rows[j] = {i: 1.0 for i in ids}

    n = len(var_req)
    if n == 0:
        return OptResult(0.0, exact)
    prog = lp.LinearProgram(benefit, maximize=True)
    rows: Dict[Tuple[object, int], Dict[int, float]] = {}
    for i, coeffs in enumerate(var_cols):
        for key, a in coeffs.items():
            rows.setdefault(key, {})[i] = a
    for (r, t), row in sorted(rows.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
        prog.add(row, "<=", net.capacity(r))
    for j, row in sorted(served_rows.items()):
        if row:
            prog.add(row, "<=", 1.0)
    for row, rhs in conservation:
        prog.add(row, "=", rhs)
    res = lp.solve(prog)
    if not res.optimal:
        raise lp.NumericalError(f"offline packing LP ended {res.status.value}")
    y: Dict[int, float] = {}
    for j, row in served_rows.items():
        y[requests[j].id] = float(sum(res.x[i] for i in row))
    return OptResult(res.value, exact, y)


# -- exact Steiner optima ----------------------------------------------------------

def _mst_cost(net, nodes, edge_cost, allowed_edges=None):
    nodes = set(nodes)
    cand = sorted((edge_cost[e], e) for e in range(net.num_edges)
                  if all(x in nodes for x in net.edges[e])
                  and (allowed_edges is None or e in allowed_edges))
    uf = UnionFind(nodes)
    tree, cost = [], 0.0
    for c, e in cand:
        if uf.union(*net.edges[e]):
            tree.append(e)
            cost += c
    if len(tree) != len(nodes) - 1:
        return None, None
    return sorted(tree), cost


def brute_force_node_weighted(net: SubstrateNetwork, edge_cost, node_cost, terminals,
                              allowed_edges=None, max_free_nodes: int = 16):
    """Exact node-weighted Steiner tree by trying every Steiner node set.

    The optimal tree on a fixed node set is a minimum spanning tree of the
    induced subgraph, so enumerating node supersets of the terminals is
    exhaustive.  Returns ``(tree edges, cost)``.
    """
    terms = sorted(set(terminals))
    others = [v for v in net.nodes if v not in terms]
    if len(others) > max_free_nodes:
        raise BudgetExceeded(f"{len(others)} Steiner candidates exceed {max_free_nodes}")
    if not connected(net, terms, allowed_edges):
        raise DisconnectedError("terminals are not connected")
    best = None
    for r in range(len(others) + 1):
        for extra in itertools.combinations(others, r):
            nodes = terms + list(extra)
            tree, ecost = _mst_cost(net, nodes, edge_cost, allowed_edges)
            if tree is None:
                continue
            total = ecost + sum(node_cost.get(v, 0.0) for v in nodes)
            if best is None or total < best[1] - EPS:
                best = (tree, total)
    return best


def brute_force_steiner(net: SubstrateNetwork, weights, terminals, allowed_edges=None):
    return brute_force_node_weighted(net, weights, {}, terminals, allowed_edges)
