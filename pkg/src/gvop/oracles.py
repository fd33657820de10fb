"""Embedding oracles: cheapest valid embedding under the current prices.

Each oracle returns an :class:`OracleResult` carrying the embedding, its
price-cost ``gamma`` and the oracle's worst-case approximation factor
``rho``, or raises :class:`EmbeddingRejected` when the request has no valid
embedding at all.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from . import lp
from .requests import (AggregateIngress, CustomerPipe, Embedding, Hose, RoutingModel,
                       UnsupportedModelError, VNetRequest)
from .substrate import (INF, SubstrateNetwork, UnionFind, connected, dijkstra, path_edges,
                        shortest_path_closure)

EPS = 1e-9


class EmbeddingRejected(Exception):
    """No valid embedding exists (the request is infeasible)."""


class DisconnectedError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class EffectivePrices:
    """Per-resource prices summed over a request's active slots."""

    edge_price: Dict[int, float] = field(default_factory=dict)
    node_price: Dict[str, float] = field(default_factory=dict)

    def edge_weights(self, net: SubstrateNetwork, scale: float = 1.0) -> List[float]:
        return [scale * self.edge_price.get(e, 0.0) for e in range(net.num_edges)]


@dataclass
class OracleResult:
    embedding: Embedding
    gamma: float
    rho: float


@dataclass
class OracleOptions:
    """Knobs shared by all oracles.

    ``steiner`` selects the edge-weighted Steiner routine for aggregate
    ingress trees: ``"mst"`` (metric-closure MST) or ``"exact"``
    (Dreyfus-Wagner dynamic program, exponential in the terminal count).
    """

    steiner: str = "mst"
    min_load_floor: float = 1.0
    hose_edge_budget: int = 12


# -- tree helpers -------------------------------------------------------------

def _edge_cost(weights, e):
    return weights[e]


def prune_tree(net: SubstrateNetwork, edges: Iterable[int], cost, terminals) -> List[int]:
    """Spanning forest of ``edges`` (cheapest first), leaves trimmed to terminals."""
    uf = UnionFind()
    tree = []
    for e in sorted(set(edges), key=lambda e: (cost[e], e)):
        u, v = net.edges[e]
        if uf.union(u, v):
            tree.append(e)
    terms = set(terminals)
    while True:
        deg: Dict[str, int] = {}
        for e in tree:
            for x in net.edges[e]:
                deg[x] = deg.get(x, 0) + 1
        drop = [e for e in tree
                if any(deg[x] == 1 and x not in terms for x in net.edges[e])]
        if not drop:
            return sorted(tree)
        tree = [e for e in tree if e not in drop]


def tree_nodes(net: SubstrateNetwork, edges: Iterable[int]) -> List[str]:
    return sorted({x for e in edges for x in net.edges[e]})


def is_tree_spanning(net: SubstrateNetwork, edges: Sequence[int], terminals) -> bool:
    """True when ``edges`` form a single tree containing every terminal."""
    edges = list(edges)
    nodes = tree_nodes(net, edges)
    if not edges or len(nodes) != len(edges) + 1:
        return False
    uf = UnionFind(nodes)
    for e in edges:
        if not uf.union(*net.edges[e]):
            return False
    return all(t in uf.parent for t in terminals)


# -- Steiner routines -----------------------------------------------------------

def mst_steiner_2approx(net: SubstrateNetwork, weights, terminals,
                        allowed_edges=None) -> Tuple[List[int], float]:
    """Metric-closure MST Steiner tree; cost at most twice the optimum.

    Returns ``(tree edge indices, total weight)``.
    """
    terms = sorted(set(terminals))
    closure, paths = shortest_path_closure(net, weights, terms, allowed_edges)
    if any(closure[(s, t)] == INF for s, t in itertools.combinations(terms, 2)):
        raise DisconnectedError("terminals are not connected")
    uf = UnionFind(terms)
    used: Set[int] = set()
    pairs = sorted(itertools.combinations(terms, 2), key=lambda p: (closure[p], p))
    for s, t in pairs:
        if uf.union(s, t):
            used.update(path_edges(net, paths[(s, t)]))
    tree = prune_tree(net, used, weights, terms)
    return tree, sum(weights[e] for e in tree)


def steiner_exact(net: SubstrateNetwork, weights, terminals,
                  allowed_edges=None) -> Tuple[List[int], float]:
    """Optimal Steiner tree by the Dreyfus-Wagner recursion."""
    terms = sorted(set(terminals))
    if not connected(net, terms, allowed_edges):
        raise DisconnectedError("terminals are not connected")
    if len(terms) == 2:
        return mst_steiner_2approx(net, weights, terms, allowed_edges)
    nodes = list(net.nodes)
    dist = {}
    paths = {}
    for v in nodes:
        d, p = dijkstra(net, v, weights, allowed_edges)
        dist[v] = d
        paths[v] = p
    root, rest = terms[-1], terms[:-1]
    k = len(rest)
    full = (1 << k) - 1
    dp: Dict[int, Dict[str, float]] = {}
    how: Dict[Tuple[int, str], tuple] = {}
    for i, t in enumerate(rest):
        m = 1 << i
        dp[m] = {v: dist[t].get(v, INF) for v in nodes}
        for v in nodes:
            how[(m, v)] = ("leaf", t)
    for mask in range(1, full + 1):
        if mask & (mask - 1) == 0:
            continue
        low = mask & -mask
        merge = {}
        for u in nodes:
            best = (INF, 0)
            sub = (mask - 1) & mask
            while sub:
                if sub & low:
                    c = dp[sub][u] + dp[mask ^ sub][u]
                    if c < best[0]:
                        best = (c, sub)
                sub = (sub - 1) & mask
            merge[u] = best
        row = {}
        for v in nodes:
            best_c, best_u = INF, None
            for u in nodes:
                c = merge[u][0] + dist[u].get(v, INF)
                if c < best_c:
                    best_c, best_u = c, u
            row[v] = best_c
            if best_u is not None:
                how[(mask, v)] = ("split", best_u, merge[best_u][1])
        dp[mask] = row

    used: Set[int] = set()

    def build(mask, v):
        kind = how[(mask, v)]
        if kind[0] == "leaf":
            used.update(path_edges(net, paths[kind[1]][v]))
            return
        _, u, sub = kind
        used.update(path_edges(net, paths[u][v]))
        build(sub, u)
        build(mask ^ sub, u)

    build(full, root)
    tree = prune_tree(net, used, weights, terms)
    return tree, sum(weights[e] for e in tree)


def node_weighted_steiner_greedy(net: SubstrateNetwork, edge_cost, node_cost: Mapping[str, float],
                                 terminals, allowed_edges=None, allowed_nodes=None):
    """Greedy spider-merging node-weighted Steiner tree.

    Components start as the terminals.  Each round picks the spider (a
    center plus shortest legs to two or more components) with the smallest
    cost per component joined, buys its nodes and merges.  Returns
    ``(tree edge indices, tree nodes, edge cost + node cost)``.
    """
    terms = sorted(set(terminals))
    if not connected(net, terms, allowed_edges, allowed_nodes):
        raise DisconnectedError("terminals are not connected")
    bought: Set[str] = set(terms)
    comps: List[Set[str]] = [{t} for t in terms]
    used: Set[int] = set()
    candidates = sorted(allowed_nodes) if allowed_nodes is not None else list(net.nodes)
    while len(comps) > 1:
        entry = {v: (0.0 if v in bought else node_cost.get(v, 0.0)) for v in candidates}
        best = None
        for v in candidates:
            dist, paths = dijkstra(net, v, edge_cost, allowed_edges, entry, allowed_nodes)
            legs = []
            for ci, comp in enumerate(comps):
                reach = [(dist[x], paths[x]) for x in sorted(comp) if x in dist]
                if reach:
                    d, p = min(reach, key=lambda r: (r[0], len(r[1]), r[1]))
                    legs.append((d, ci, p))
            if len(legs) < 2:
                continue
            legs.sort(key=lambda leg: (leg[0], leg[1]))
            total = entry[v]
            for r, leg in enumerate(legs, 1):
                total += leg[0]
                if r < 2:
                    continue
                ratio = total / r
                if best is None or ratio < best[0] - EPS:
                    best = (ratio, v, legs[:r])
        _, center, legs = best
        new_nodes = {center}
        for _, _, p in legs:
            new_nodes.update(p)
            used.update(path_edges(net, p))
        bought |= new_nodes
        merged = set(new_nodes)
        keep = []
        for comp in comps:
            if comp & merged:
                merged |= comp
            else:
                keep.append(comp)
        comps = keep + [merged]
    tree = prune_tree(net, used, edge_cost, terms)
    nodes = tree_nodes(net, tree)
    cost = sum(edge_cost[e] for e in tree) + sum(node_cost.get(v, 0.0) for v in nodes)
    return tree, nodes, cost


# -- hose model -----------------------------------------------------------------

def tree_sides(net: SubstrateNetwork, tree: Sequence[int], e: int):
    """Node sets of the two components left after deleting ``e`` from ``tree``."""
    u, v = net.edges[e]
    adj: Dict[str, List[str]] = {}
    for f in tree:
        if f == e:
            continue
        a, b = net.edges[f]
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    side = {u}
    stack = [u]
    while stack:
        x = stack.pop()
        for y in adj.get(x, ()):
            if y not in side:
                side.add(y)
                stack.append(y)
    if v in side:
        raise ValueError("edge set is not a tree")
    return side, set(tree_nodes(net, tree)) - side


def hose_cut_bound(hose: Hose, side_a, side_b) -> float:
    """Worst-case hose traffic crossing the cut ``(side_a, side_b)``."""
    out_a = sum(hose.b_out[x] for x in side_a)
    in_a = sum(hose.b_in[x] for x in side_a)
    out_b = sum(hose.b_out[x] for x in side_b)
    in_b = sum(hose.b_in[x] for x in side_b)
    return min(out_a, in_b) + min(in_a, out_b)


def hose_edge_reservation(net: SubstrateNetwork, tree: Sequence[int], e: int,
                          req: VNetRequest) -> float:
    if e not in tree:
        raise ValueError(f"edge {e} is not in the tree")
    a, b = tree_sides(net, tree, e)
    terms = req.terminals
    return hose_cut_bound(req.traffic, a & terms, b & terms)


def enumerate_steiner_trees(net: SubstrateNetwork, terminals, allowed_edges=None,
                            budget: int = 12, pruned: bool = True):
    """All edge sets forming a tree that spans ``terminals``.

    With ``pruned`` only trees whose leaves are terminals are produced.
    Raises :class:`BudgetExceeded` when more than ``budget`` edges are
    candidates.
    """
    cand = [e for e in range(net.num_edges) if allowed_edges is None or e in allowed_edges]
    if len(cand) > budget:
        raise BudgetExceeded(f"{len(cand)} candidate edges exceed budget {budget}")
    terms = set(terminals)
    out = []
    for size in range(1, len(cand) + 1):
        for combo in itertools.combinations(cand, size):
            if not is_tree_spanning(net, combo, terms):
                continue
            if pruned:
                deg: Dict[str, int] = {}
                for e in combo:
                    for x in net.edges[e]:
                        deg[x] = deg.get(x, 0) + 1
                if any(d == 1 and x not in terms for x, d in deg.items()):
                    continue
            out.append(list(combo))
    return out


# -- oracles ----------------------------------------------------------------------

def oracle_aggregate_tree(net: SubstrateNetwork, prices: EffectivePrices, req: VNetRequest,
                          options: Optional[OracleOptions] = None) -> OracleResult:
    options = options or OracleOptions()
    ingress = req.traffic.ingress
    pr = req.packet_rate
    allowed = {e for e in range(net.num_edges) if net.edge_capacity[e] >= ingress}
    allowed_nodes = None
    if pr > 0:
        allowed_nodes = {v for v in net.nodes if net.node_capacity[v] >= pr}
        allowed = {e for e in allowed if all(x in allowed_nodes for x in net.edges[e])}
    terms = sorted(req.terminals)
    if not connected(net, terms, allowed, allowed_nodes):
        raise EmbeddingRejected("terminals disconnected after deleting low-capacity resources")
    k = len(terms)
    weights = prices.edge_weights(net, ingress)
    if pr > 0:
        node_cost = {v: pr * prices.node_price.get(v, 0.0) for v in net.nodes}
        tree, nodes, _ = node_weighted_steiner_greedy(net, weights, node_cost, terms,
                                                      allowed, allowed_nodes)
        rho = 1.0 if k == 2 else 2.0 * math.log(k)
        # unbounded routers have no row
        usage = {v: pr for v in nodes if net.node_capacity[v] < INF}
    else:
        if options.steiner == "exact":
            tree, _ = steiner_exact(net, weights, terms, allowed)
            rho = 1.0
        elif options.steiner == "mst":
            tree, _ = mst_steiner_2approx(net, weights, terms, allowed)
            rho = 1.0 if k == 2 else 2.0
        else:
            raise ValueError(f"unknown Steiner routine {options.steiner!r}")
        usage = {}
    emb = Embedding({e: float(ingress) for e in tree}, usage)
    return OracleResult(emb, emb.cost(prices), rho)


def oracle_hose_tree_exact(net: SubstrateNetwork, prices: EffectivePrices, req: VNetRequest,
                           options: Optional[OracleOptions] = None) -> OracleResult:
    options = options or OracleOptions()
    best = None
    for tree in enumerate_steiner_trees(net, req.terminals, budget=options.hose_edge_budget):
        res = {e: hose_edge_reservation(net, tree, e, req) for e in tree}
        if any(res[e] > net.edge_capacity[e] + EPS for e in tree):
            continue
        emb = Embedding(res)
        g = emb.cost(prices)
        if best is None or g < best[0] - EPS:
            best = (g, emb)
    if best is None:
        raise EmbeddingRejected("no feasible Steiner tree")
    return OracleResult(best[1], best[0], 1.0)


def _snap(values, tol=EPS):
    r = np.round(values)
    return np.where(np.abs(values - r) <= tol * np.maximum(1.0, np.abs(r)), r, values)


def _mcf_lp(net, prices, commodities, forbidden, caps):
    """Arc-flow variables ``(k, e, dir)`` flattened to ``k*2m + 2e + dir``."""
    m = net.num_edges
    nvar = 2 * m * len(commodities)
    cost = np.zeros(nvar)
    for k in range(len(commodities)):
        for e in range(m):
            p = prices.edge_price.get(e, 0.0)
            cost[k * 2 * m + 2 * e] = p
            cost[k * 2 * m + 2 * e + 1] = p
    prog = lp.LinearProgram(cost, maximize=False)
    for k, (s, t, d) in enumerate(commodities):
        base = k * 2 * m
        for v in net.nodes:
            row = {}
            for _, e in net.neighbors(v):
                a, _ = net.edges[e]
                fwd, bwd = base + 2 * e, base + 2 * e + 1
                out_var, in_var = (fwd, bwd) if a == v else (bwd, fwd)
                row[out_var] = row.get(out_var, 0.0) + 1.0
                row[in_var] = row.get(in_var, 0.0) - 1.0
            rhs = d if v == s else (-d if v == t else 0.0)
            if row:
                prog.add(row, "=", rhs)
    for e in range(m):
        cols = {}
        for k in range(len(commodities)):
            cols[k * 2 * m + 2 * e] = 1.0
            cols[k * 2 * m + 2 * e + 1] = 1.0
        prog.add(cols, "<=", 0.0 if e in forbidden else caps[e])
    return prog


def _least_volume(prog: lp.LinearProgram, res: lp.LPResult) -> np.ndarray:
    """Minimum-volume point among the optimal solutions of ``prog``.

    Complementary slackness pins the face: columns and slacks with a
    positive reduced cost are fixed at zero.
    """
    face = lp.LinearProgram(np.ones(prog.num_vars), maximize=False)
    for (row, rel, rhs), sr in zip(prog.constraints, res.slack_reduced_costs):
        if sr is not None and sr > EPS:
            rel = "="
        face.add(row, rel, rhs)
    fixed = {j: 1.0 for j in np.nonzero(res.reduced_costs > EPS)[0]}
    if fixed:
        face.add(fixed, "=", 0.0)
    out = lp.solve(face)
    return out.x if out.optimal else res.x


def _decompose(net, flows, s, t):
    """Split an s-t arc flow ``{(a, b): f}`` into paths."""
    flows = {k: v for k, v in flows.items() if v > EPS}
    out = []
    for _ in range(4 * len(flows) + 4):
        path = [s]
        seen = {s}
        while path[-1] != t:
            nxt = sorted((b, f) for (a, b), f in flows.items() if a == path[-1] and b not in seen)
            if not nxt:
                break
            path.append(nxt[0][0])
            seen.add(nxt[0][0])
        if path[-1] != t:
            break
        arcs = list(zip(path, path[1:]))
        f = min(flows[a] for a in arcs)
        for a in arcs:
            flows[a] -= f
            if flows[a] <= EPS:
                del flows[a]
        out.append((tuple(path), float(f)))
    return out


def oracle_customer_pipe_mcf(net: SubstrateNetwork, prices: EffectivePrices, req: VNetRequest,
                             options: Optional[OracleOptions] = None) -> OracleResult:
    """Min-cost multicommodity flow; ties go to the flow with least total volume."""
    options = options or OracleOptions()
    commodities = req.traffic.commodities()
    m = net.num_edges
    caps = net.edge_capacity
    forbidden: Set[int] = set()
    for attempt in range(2):
        prog = _mcf_lp(net, prices, commodities, forbidden, caps)
        res = lp.solve(prog)
        if not res.optimal:
            raise EmbeddingRejected("multicommodity flow infeasible")
        # second stage: least total volume on the optimal face (drops cycles)
        x = _snap(_least_volume(prog, res))
        x[x < EPS] = 0.0
        per_edge = np.zeros(m)
        for k in range(len(commodities)):
            per_edge += x[k * 2 * m:(k + 1) * 2 * m:2] + x[k * 2 * m + 1:(k + 1) * 2 * m:2]
        small = {e for e in range(m) if 0 < per_edge[e] < options.min_load_floor - EPS}
        if not small:
            break
        forbidden |= small
    else:
        raise EmbeddingRejected("flow below the load floor could not be rerouted")
    reservation = {e: float(per_edge[e]) for e in range(m) if per_edge[e] > 0}
    commodity_flows = {}
    for k, (s, t, _) in enumerate(commodities):
        arcs = {}
        for e in range(m):
            a, b = net.edges[e]
            fwd, bwd = x[k * 2 * m + 2 * e], x[k * 2 * m + 2 * e + 1]
            if fwd > 0:
                arcs[(a, b)] = float(fwd)
            if bwd > 0:
                arcs[(b, a)] = float(bwd)
        commodity_flows[(s, t)] = _decompose(net, arcs, s, t)
    emb = Embedding(reservation, {}, commodity_flows)
    return OracleResult(emb, emb.cost(prices), 1.0)


ORACLES = {
    ("aggregate_ingress", RoutingModel.TREE): oracle_aggregate_tree,
    ("aggregate_ingress", RoutingModel.SINGLE_PATH): oracle_aggregate_tree,
    ("hose", RoutingModel.TREE): oracle_hose_tree_exact,
    ("customer_pipe", RoutingModel.MULTIPATH): oracle_customer_pipe_mcf,
}


def find_embedding(net: SubstrateNetwork, prices: EffectivePrices, req: VNetRequest,
                   options: Optional[OracleOptions] = None) -> OracleResult:
    try:
        oracle = ORACLES[req.model]
    except KeyError:
        raise UnsupportedModelError(
            f"unsupported model: {req.traffic.kind} traffic with {req.routing.value} routing")
    return oracle(net, prices, req, options)
