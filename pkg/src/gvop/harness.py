"""Experiment plumbing: planted instances, greedy baselines, batch runs, reports."""
from __future__ import annotations

import csv
import io
import json
import math
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .checks import check_opt, verify_run
from .engine import GVOP, EngineConfig, beta_bounds
from .oracles import hose_edge_reservation, prune_tree
from .requests import (AggregateIngress, CustomerPipe, Embedding, Hose, RoutingModel,
                       VNetRequest, dump_requests, load_requests, maximum_possible_load,
                       validate_request)
from .substrate import (EdgeResource, NodeResource, SubstrateNetwork, ValidationError,
                        dijkstra, dump_substrate, load_edge_list, load_substrate, path_edges)


class GenerationError(RuntimeError):
    pass


# -- topologies ---------------------------------------------------------------------

def random_topology(n: int, m: int, seed: int, capacity: float = 1.0) -> SubstrateNetwork:
    """Connected random graph: a random spanning tree plus extra edges."""
    rng = random.Random(seed)
    nodes = [f"n{i}" for i in range(n)]
    edges = set()
    order = nodes[:]
    rng.shuffle(order)
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        edges.add(tuple(sorted((u, v))))
    pairs = [tuple(sorted((a, b))) for i, a in enumerate(nodes) for b in nodes[i + 1:]]
    pairs = [p for p in pairs if p not in edges]
    rng.shuffle(pairs)
    for p in pairs[:max(0, m - len(edges))]:
        edges.add(p)
    return SubstrateNetwork.build(nodes, [(u, v, capacity) for u, v in sorted(edges)])


def grid_topology(rows: int, cols: int, capacity: float = 1.0) -> SubstrateNetwork:
    nodes = [f"r{i}c{j}" for i in range(rows) for j in range(cols)]
    edges = []
    for i in range(rows):
        for j in range(cols):
            if j + 1 < cols:
                edges.append((f"r{i}c{j}", f"r{i}c{j + 1}", capacity))
            if i + 1 < rows:
                edges.append((f"r{i}c{j}", f"r{i + 1}c{j}", capacity))
    return SubstrateNetwork.build(nodes, edges)


def read_topology(path) -> SubstrateNetwork:
    """JSON instance document or plain ``u v [capacity]`` edge list."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return load_substrate(text)
    return load_edge_list(text)


# -- planted instances ----------------------------------------------------------------

@dataclass
class PlantedParams:
    """Generator knobs.

    ``stride`` is the number of walk steps between terminal picks.  With
    ``max_duration > 1`` request ``j`` starts at slot ``j - 1`` and lasts a
    uniform number of slots.  Capacities are the planted loads times
    ``capacity_factor``, raised to at least ``min_capacity``.
    """

    num_requests: int = 10
    k: int = 3
    stride: int = 2
    ingress: float = 2.0
    benefit_range: Tuple[float, float] = (0.0, 5.0)
    traffic: str = "aggregate_ingress"
    max_duration: int = 1
    capacity_factor: float = 1.0
    min_capacity: float = 1.0
    max_walk: int = 10000
    retries: int = 50


@dataclass
class PlantedInstance:
    net: SubstrateNetwork
    requests: List[VNetRequest]
    planted_optimum: float
    planted: List[Embedding]


def _walk_terminals(net, rng, k, stride, max_walk):
    v = rng.choice(list(net.nodes))
    walk = [v]
    terms = [v]
    steps = 0
    while len(terms) < k:
        for _ in range(max_walk):
            nbrs = net.neighbors(walk[-1])
            if not nbrs:
                return None
            walk.append(rng.choice(nbrs)[0])
            steps += 1
            if steps >= stride and walk[-1] not in terms:
                break
        else:
            return None
        terms.append(walk[-1])
        steps = 0
    return walk, terms


def _planted_tree(net, walk, terms):
    edges = set(path_edges(net, walk))
    cost = {e: 0.0 for e in edges}
    return prune_tree(net, edges, cost, terms)


def _walk_path(net, walk, s, t):
    """Simple path from ``s`` to ``t`` inside the walk's edges."""
    allowed = set(path_edges(net, walk))
    unit = {e: 1.0 for e in allowed}
    _, paths = dijkstra(net, s, unit, allowed)
    return paths[t]


def generate_planted_instance(topology: SubstrateNetwork, seed: int,
                              params: Optional[PlantedParams] = None) -> PlantedInstance:
    """Requests embedded along random walks, capacities set so all of them fit."""
    p = params or PlantedParams()
    rng = random.Random(seed)
    requests, planted = [], []
    load: Dict[Tuple[int, int], float] = {}
    for j in range(1, p.num_requests + 1):
        for _ in range(p.retries):
            got = _walk_terminals(topology, rng, p.k, p.stride, p.max_walk)
            if got is not None:
                break
        else:
            raise GenerationError("random walk kept failing to collect terminals")
        walk, terms = got
        lo, hi = p.benefit_range
        benefit = max(1.0, rng.uniform(lo, hi))
        if p.max_duration > 1:
            slots = frozenset(range(j - 1, j - 1 + rng.randint(1, p.max_duration)))
        else:
            slots = frozenset({0})
        if p.traffic == "aggregate_ingress":
            tree = _planted_tree(topology, walk, terms)
            traffic = AggregateIngress(p.ingress)
            routing = RoutingModel.TREE
            emb = Embedding({e: p.ingress for e in tree})
        elif p.traffic == "hose":
            tree = _planted_tree(topology, walk, terms)
            traffic = Hose({t: p.ingress for t in terms}, {t: p.ingress for t in terms})
            routing = RoutingModel.TREE
            req = VNetRequest(j, frozenset(terms), traffic, routing, benefit, slots)
            emb = Embedding({e: hose_edge_reservation(topology, tree, e, req) for e in tree})
        elif p.traffic == "customer_pipe":
            src = terms[0]
            demands = {(src, t): p.ingress for t in terms[1:]}
            traffic = CustomerPipe(demands)
            routing = RoutingModel.MULTIPATH
            res: Dict[int, float] = {}
            for t in terms[1:]:
                for e in path_edges(topology, _walk_path(topology, walk, src, t)):
                    res[e] = res.get(e, 0.0) + p.ingress
            emb = Embedding(res)
        else:
            raise ValueError(f"unknown traffic model {p.traffic!r}")
        req = VNetRequest(j, frozenset(terms), traffic, routing, benefit, slots)
        requests.append(req)
        planted.append(emb)
        for e, a in emb.edge_reservation.items():
            for t in slots:
                load[(e, t)] = load.get((e, t), 0.0) + a
    caps = []
    for e in range(topology.num_edges):
        peak = max((a for (f, _), a in load.items() if f == e), default=0.0)
        caps.append(max(p.min_capacity, 1.0, peak * p.capacity_factor))
    net = topology.with_edge_capacities(caps)
    opt = sum(r.benefit for r in requests)
    return PlantedInstance(net, requests, opt, planted)


def planted_is_feasible(inst: PlantedInstance) -> bool:
    load: Dict[Tuple[int, int], float] = {}
    for req, emb in zip(inst.requests, inst.planted):
        for e, a in emb.edge_reservation.items():
            for t in req.slots:
                load[(e, t)] = load.get((e, t), 0.0) + a
    return all(a <= inst.net.edge_capacity[e] + 1e-9 for (e, _), a in load.items())


# -- greedy baselines ------------------------------------------------------------------

@dataclass
class GreedyReport:
    policy: str
    accepted: List[int] = field(default_factory=list)
    rejected: List[int] = field(default_factory=list)
    benefit: float = 0.0
    resource_usage: float = 0.0


def _greedy_tree(net, terms, weight_fn, allowed):
    """Closest-pair path coalescing; ``weight_fn(tree_so_far)`` gives edge weights."""
    comps = [{t} for t in sorted(terms)]
    tree: List[int] = []
    while len(comps) > 1:
        weights = weight_fn(tree)
        for e in tree:
            weights[e] = 0.0
        best = None
        for i, ci in enumerate(comps):
            for s in sorted(ci):
                dist, paths = dijkstra(net, s, weights, allowed)
                for jdx in range(i + 1, len(comps)):
                    for t in sorted(comps[jdx]):
                        if t in dist:
                            key = (dist[t], len(paths[t]), i, jdx, paths[t])
                            if best is None or key < best:
                                best = key
        if best is None:
            return None
        _, _, i, jdx, path = best
        for e in path_edges(net, path):
            if e not in tree:
                tree.append(e)
        merged = comps[i] | comps[jdx] | set(path)
        comps = [c for n, c in enumerate(comps) if n not in (i, jdx)] + [merged]
    return sorted(tree)


def greedy_baseline(net: SubstrateNetwork, requests: Sequence[VNetRequest],
                    policy: str = "unit-weight") -> GreedyReport:
    """First-fit Steiner embedding that never overloads a resource.

    ``unit-weight`` routes on hop counts; ``load-ratio`` weighs each edge by
    its current load over capacity.  Only aggregate ingress tree requests
    are embeddable; everything else is rejected.
    """
    if policy not in ("unit-weight", "load-ratio"):
        raise ValueError(f"unknown policy {policy!r}")
    report = GreedyReport(policy)
    load: Dict[Tuple[int, int], float] = {}
    for req in requests:
        try:
            validate_request(net, req)
        except ValidationError:
            report.rejected.append(req.id)
            continue
        if not isinstance(req.traffic, AggregateIngress) or req.packet_rate > 0:
            report.rejected.append(req.id)
            continue
        ing = req.traffic.ingress
        slots = sorted(req.slots)

        def residual_ok(e):
            return all(load.get((e, t), 0.0) + ing <= net.edge_capacity[e] + 1e-9 for t in slots)

        allowed = {e for e in range(net.num_edges) if residual_ok(e)}

        def weights(tree):
            if policy == "unit-weight":
                return [1.0] * net.num_edges
            w = []
            for e in range(net.num_edges):
                peak = max((load.get((e, t), 0.0) for t in slots), default=0.0)
                if e in tree:
                    peak += ing
                w.append(peak / net.edge_capacity[e])
            return w

        tree = _greedy_tree(net, req.terminals, weights, allowed)
        if tree is None:
            report.rejected.append(req.id)
            continue
        for e in tree:
            for t in slots:
                load[(e, t)] = load.get((e, t), 0.0) + ing
        report.accepted.append(req.id)
        report.benefit += req.benefit
        report.resource_usage += ing * len(tree) * len(slots)
    return report


# -- runs ---------------------------------------------------------------------------------

def a_priori_beta(net: SubstrateNetwork, requests: Sequence[VNetRequest]) -> float:
    """Upper bound on beta' computable before the run starts."""
    w = 0.0
    for r in requests:
        col = maximum_possible_load(r) * net.num_edges
        if r.packet_rate > 0:
            col += r.packet_rate * len(net.nodes)
        w = max(w, col)
    b = max((r.benefit for r in requests), default=1.0)
    t_max = max((r.duration for r in requests), default=1)
    return beta_bounds(w, b, t_max)[1]


@dataclass
class ExperimentConfig:
    """One run.  Either ``requests_path`` or ``generate`` supplies requests."""

    substrate_path: Optional[str] = None
    requests_path: Optional[str] = None
    generate: Optional[PlantedParams] = None
    seed: int = 0
    mode: str = "plain"
    scale_beta: Optional[float] = None
    floor: float = 1.0
    steiner: str = "mst"
    out_dir: Optional[str] = None
    opt_edge_limit: int = 12
    opt_request_limit: int = 8


@dataclass
class RunReport:
    mode: str
    accepted: int
    rejected: int
    benefit: float
    primal: float
    dual: float
    max_congestion: float
    beta: float
    beta_prime: float
    beta_rho: float
    capacity_scale: float
    fractional_benefit: Optional[float] = None
    opt: Optional[float] = None
    competitive_ratio: Optional[float] = None
    planted_optimum: Optional[float] = None
    checks: Dict[str, List[str]] = field(default_factory=dict)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("wall_time")
        return d


CONGESTION_COLUMNS = ["resource", "slot", "load", "capacity", "congestion"]


def congestion_table(engine: GVOP) -> str:
    """CSV: one row per touched (resource, slot), against original capacities."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CONGESTION_COLUMNS)
    rows = []
    for r, by_slot in engine.state.load.items():
        name = f"e{r.index}" if isinstance(r, EdgeResource) else f"v:{r.node}"
        c = engine.net.capacity(r)
        for t, a in by_slot.items():
            rows.append((name, t, a, c, a / c))
    for row in sorted(rows):
        w.writerow([row[0], row[1], repr(row[2]), repr(row[3]), repr(row[4])])
    return buf.getvalue()


def run_log_text(engine: GVOP) -> str:
    return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in engine.log)


def load_instance(config: ExperimentConfig):
    planted_opt = None
    if config.generate is not None:
        if config.substrate_path is None:
            raise ValueError("generation needs a topology (substrate_path)")
        inst = generate_planted_instance(read_topology(config.substrate_path), config.seed,
                                         config.generate)
        return inst.net, inst.requests, inst.planted_optimum
    if config.substrate_path is None or config.requests_path is None:
        raise ValueError("need substrate_path and requests_path (or generate)")
    net = read_topology(config.substrate_path)
    reqs = load_requests(Path(config.requests_path).read_text())
    return net, reqs, planted_opt


def run_instance(net: SubstrateNetwork, requests: Sequence[VNetRequest],
                 config: ExperimentConfig, planted_optimum: Optional[float] = None):
    """Stream ``requests`` through a fresh engine; returns ``(report, engine)``."""
    if config.mode not in ("plain", "scaled", "fractional"):
        raise ValueError(f"unknown mode {config.mode!r}")
    t0 = time.perf_counter()
    scale = 1.0
    if config.mode == "scaled":
        scale = config.scale_beta or a_priori_beta(net, requests)
    engine = GVOP(net, EngineConfig(capacity_scale=scale, min_load_floor=config.floor,
                                    steiner=config.steiner))
    engine.run(requests)
    small = net.num_edges <= config.opt_edge_limit and len(requests) <= config.opt_request_limit
    if engine.state.accepted:
        beta, beta_prime, beta_rho = engine.theoretical_beta()
    else:
        beta = beta_prime = beta_rho = 0.0
    report = RunReport(
        mode=config.mode,
        accepted=len(engine.state.accepted),
        rejected=len(engine.decisions) - len(engine.state.accepted),
        benefit=engine.dual_value(),
        primal=engine.primal_value(),
        dual=engine.dual_value(),
        max_congestion=engine.congestion_report().max,
        beta=beta, beta_prime=beta_prime, beta_rho=beta_rho,
        capacity_scale=scale,
        planted_optimum=planted_optimum,
    )
    if config.mode == "fractional":
        report.fractional_benefit = engine.fractional_benefit()
    report.checks = verify_run(engine, requests, small)
    if small:
        opt = check_opt(engine, requests)
        if opt["exact"]:
            report.opt = opt["opt"]
            if report.benefit > 0:
                report.competitive_ratio = opt["opt"] / report.benefit
    report.wall_time = time.perf_counter() - t0
    return report, engine


def run_experiment(config: ExperimentConfig) -> RunReport:
    net, requests, planted_opt = load_instance(config)
    report, engine = run_instance(net, requests, config, planted_opt)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "run_log.jsonl").write_text(run_log_text(engine))
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
        (out / "congestion.csv").write_text(congestion_table(engine))
    return report


def write_instance(inst: PlantedInstance, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "substrate.json").write_text(dump_substrate(inst.net))
    (out / "requests.json").write_text(dump_requests(inst.requests))
    (out / "planted.json").write_text(json.dumps({"planted_optimum": inst.planted_optimum}))
