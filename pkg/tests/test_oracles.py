import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import agg
from gvop import (CustomerPipe, EffectivePrices, EmbeddingRejected, Hose, OracleOptions,
                  RoutingModel, SubstrateNetwork, VNetRequest)
from gvop.offline import brute_force_node_weighted, brute_force_steiner, enumerate_embeddings
from gvop.oracles import (DisconnectedError, find_embedding, hose_cut_bound, hose_edge_reservation,
                          mst_steiner_2approx, node_weighted_steiner_greedy, oracle_aggregate_tree,
                          oracle_customer_pipe_mcf, oracle_hose_tree_exact, steiner_exact)

ZERO = EffectivePrices()


def pipe(demands, j=1, benefit=2, slots=(0,)):
    terms = {x for pair in demands for x in pair}
    return VNetRequest(j, frozenset(terms), CustomerPipe(demands), RoutingModel.MULTIPATH,
                       benefit, frozenset(slots))


def hose(b_in, b_out, j=1):
    return VNetRequest(j, frozenset(b_in), Hose(b_in, b_out), RoutingModel.TREE, 2)


# -- aggregate ingress ---------------------------------------------------------------

def test_aggregate_zero_prices_path(path4):
    res = oracle_aggregate_tree(path4, ZERO, agg(1, "ad", ingress=2))
    assert res.embedding.edge_reservation == {0: 2.0, 1: 2.0, 2: 2.0}
    assert res.gamma == 0
    assert res.rho == 1


def test_aggregate_deletes_thin_edges():
    net = SubstrateNetwork.build("abcd", [("a", "b", 4), ("b", "c", 1), ("c", "d", 4)])
    with pytest.raises(EmbeddingRejected):
        oracle_aggregate_tree(net, ZERO, agg(1, "ad", ingress=2))


def test_aggregate_takes_cheap_detour(triangle):
    prices = EffectivePrices({0: 5, 1: 1, 2: 1})
    res = oracle_aggregate_tree(triangle, prices, agg(1, "ab", ingress=1))
    assert res.embedding.tree_edges() == [1, 2]
    assert res.gamma == 2


def test_single_path_routes_like_tree(triangle):
    prices = EffectivePrices({0: 5, 1: 1, 2: 1})
    req = agg(1, "ab", routing=RoutingModel.SINGLE_PATH)
    assert find_embedding(triangle, prices, req).embedding.tree_edges() == [1, 2]


def test_aggregate_rho_by_routine():
    net = SubstrateNetwork.build("sabc", [("s", "a", 4), ("s", "b", 4), ("s", "c", 4)])
    req = agg(1, "abc")
    assert oracle_aggregate_tree(net, ZERO, req).rho == 2
    assert oracle_aggregate_tree(net, ZERO, req, OracleOptions(steiner="exact")).rho == 1
    with pytest.raises(ValueError):
        oracle_aggregate_tree(net, ZERO, req, OracleOptions(steiner="lp"))


def test_aggregate_with_packet_rate_uses_node_rows():
    nodes = {"a": None, "b": None, "c": None, "x": 1, "y": 5}
    net = SubstrateNetwork.build(nodes, [("a", "x", 4), ("x", "b", 4), ("b", "y", 4),
                                         ("y", "c", 4), ("a", "y", 4)])
    req = agg(1, "abc", packet_rate=2)
    res = oracle_aggregate_tree(net, EffectivePrices({}, {"y": 0.5}), req)
    # x cannot carry packet rate 2, so every tree goes through y
    assert "x" not in res.embedding.node_usage
    assert res.embedding.node_usage == {"y": 2}  # unbounded routers carry no row
    assert res.gamma == pytest.approx(2 * 0.5)
    assert res.rho == pytest.approx(2 * math.log(3))


# -- hose ---------------------------------------------------------------------------

def test_hose_single_edge():
    net = SubstrateNetwork.build("uv", [("u", "v", 4)])
    req = hose({"u": 1, "v": 2}, {"u": 3, "v": 2})
    res = oracle_hose_tree_exact(net, EffectivePrices({0: 0.5}), req)
    assert res.embedding.edge_reservation == {0: 3}
    assert res.gamma == pytest.approx(1.5)
    assert res.rho == 1


def test_hose_single_edge_too_thin():
    net = SubstrateNetwork.build("uv", [("u", "v", 2)])
    with pytest.raises(EmbeddingRejected):
        oracle_hose_tree_exact(net, ZERO, hose({"u": 1, "v": 2}, {"u": 3, "v": 2}))


def test_hose_picks_cheaper_route():
    net = SubstrateNetwork.build("sxyt", [("s", "x", 4), ("x", "t", 4), ("s", "y", 4), ("y", "t", 4)])
    req = hose({"s": 1, "t": 1}, {"s": 1, "t": 1})
    res = oracle_hose_tree_exact(net, EffectivePrices({0: 1, 1: 1, 2: 2, 3: 2}), req)
    assert res.embedding.edge_reservation == {0: 2, 1: 2}
    assert res.gamma == 4
    res = oracle_hose_tree_exact(net, EffectivePrices({0: 3, 1: 1, 2: 1, 3: 1}), req)
    assert res.embedding.tree_edges() == [2, 3]


def test_hose_cut_formula_examples():
    unit = Hose({"u": 1, "v": 1}, {"u": 1, "v": 1})
    assert hose_cut_bound(unit, {"u"}, {"v"}) == 2
    skew = Hose({"u": 1, "v": 2}, {"u": 3, "v": 2})
    assert hose_cut_bound(skew, {"u"}, {"v"}) == 3


def test_hose_reservation_on_star():
    net = SubstrateNetwork.build("sabc", [("s", "a", 9), ("s", "b", 9), ("s", "c", 9)])
    req = hose({"a": 1, "b": 2, "c": 1}, {"a": 3, "b": 1, "c": 1})
    tree = [0, 1, 2]
    # edge sa: {a} vs {b,c}: min(3, 3) + min(1, 2) = 4
    assert hose_edge_reservation(net, tree, 0, req) == 4
    # edge sb: {b} vs {a,c}: min(1, 2) + min(2, 4) = 3
    assert hose_edge_reservation(net, tree, 1, req) == 3
    with pytest.raises(ValueError):
        hose_edge_reservation(net, [0, 1], 2, req)


def test_hose_leaf_edges_of_two_terminal_trees_carry_two():
    net = SubstrateNetwork.build("axb", [("a", "x", 4), ("x", "b", 4)])
    req = hose({"a": 1, "b": 1}, {"a": 1, "b": 1})
    assert [hose_edge_reservation(net, [0, 1], e, req) for e in (0, 1)] == [2, 2]


# -- customer pipe -----------------------------------------------------------------

def test_pipe_detour():
    net = SubstrateNetwork.build("abc", [("a", "b", 1), ("a", "c", 1), ("b", "c", 1)])
    res = oracle_customer_pipe_mcf(net, EffectivePrices({0: 5, 1: 1, 2: 1}), pipe({("a", "b"): 1}))
    assert res.embedding.edge_reservation == {1: 1.0, 2: 1.0}
    assert res.gamma == pytest.approx(2)
    assert res.embedding.commodity_flows == {("a", "b"): [(("a", "c", "b"), 1.0)]}
    assert res.rho == 1


def test_pipe_single_edge(single_edge):
    res = oracle_customer_pipe_mcf(single_edge, ZERO, pipe({("u", "v"): 1}))
    assert res.embedding.edge_reservation == {0: 1.0}
    assert res.gamma == 0


def test_pipe_demand_exceeds_cut(single_edge):
    with pytest.raises(EmbeddingRejected):
        oracle_customer_pipe_mcf(single_edge, ZERO, pipe({("u", "v"): 2}))


def test_pipe_no_zero_cost_cycles():
    net = SubstrateNetwork.build("abcd", [("a", "b", 3), ("b", "c", 3), ("c", "d", 3), ("d", "a", 3)])
    res = oracle_customer_pipe_mcf(net, ZERO, pipe({("a", "b"): 1}))
    assert res.embedding.edge_reservation == {0: 1.0}


def test_pipe_split_flow_respects_floor():
    # route via x is cheap but only carries 2 of the 2.5 demanded
    net = SubstrateNetwork.build("sxyt", [("s", "x", 2), ("x", "t", 2), ("s", "y", 4), ("y", "t", 4)])
    req = pipe({("s", "t"): 2.5})
    prices = EffectivePrices({0: 0, 1: 0, 2: 1, 3: 1})
    with pytest.raises(EmbeddingRejected):  # forbidding s-y-t leaves only capacity 2
        oracle_customer_pipe_mcf(net, prices, req)
    res = oracle_customer_pipe_mcf(net, prices, req, OracleOptions(min_load_floor=0.25))
    assert res.embedding.edge_reservation == {0: 2.0, 1: 2.0, 2: 0.5, 3: 0.5}
    assert res.gamma == pytest.approx(1)


def test_pipe_floor_reroute_succeeds():
    # both commodities want a-d; the first solve leaves 0.5 of d->c on a-c,
    # forbidding a-c sends all of d->c over c-d
    net = SubstrateNetwork.build("abcd", [("c", "d", 2), ("b", "d", 1), ("a", "c", 4), ("a", "d", 2),
                                          ("a", "b", 1)])
    prices = EffectivePrices({0: 2, 1: 0.5, 2: 0.5, 3: 1, 4: 1})
    req = pipe({("d", "c"): 1.5, ("a", "d"): 1.5})
    res = oracle_customer_pipe_mcf(net, prices, req)
    assert res.embedding.edge_reservation == {0: 1.5, 3: 1.5}
    assert res.gamma == pytest.approx(4.5)
    relaxed = oracle_customer_pipe_mcf(net, prices, req, OracleOptions(min_load_floor=0.25))
    assert relaxed.embedding.edge_reservation[2] == pytest.approx(0.5)
    assert relaxed.gamma < res.gamma


def test_pipe_two_commodities_share_capacity():
    net = SubstrateNetwork.build("abc", [("a", "b", 2), ("a", "c", 2), ("b", "c", 2)])
    req = pipe({("a", "b"): 2, ("b", "a"): 1})
    res = oracle_customer_pipe_mcf(net, EffectivePrices({0: 0, 1: 1, 2: 1}), req)
    assert res.embedding.edge_reservation == {0: 2.0, 1: 1.0, 2: 1.0}
    assert res.gamma == pytest.approx(2)


# -- Steiner routines ----------------------------------------------------------------

def test_mst_two_terminals_is_shortest_path(triangle):
    tree, cost = mst_steiner_2approx(triangle, [5, 1, 1], "ab")
    assert (tree, cost) == ([1, 2], 2)


def test_mst_star():
    net = SubstrateNetwork.build("sabc", [("s", "a", 1), ("s", "b", 1), ("s", "c", 1)])
    assert mst_steiner_2approx(net, [1, 1, 1], "abc") == ([0, 1, 2], 3)
    assert brute_force_steiner(net, [1, 1, 1], "abc")[1] == 3


def test_mst_four_cycle():
    net = SubstrateNetwork.build("abcd", [("a", "b", 1), ("b", "c", 1), ("c", "d", 1), ("d", "a", 1)])
    assert mst_steiner_2approx(net, [1] * 4, "ac")[1] == 2


def test_steiner_disconnected():
    net = SubstrateNetwork.build("abcd", [("a", "b", 1), ("c", "d", 1)])
    for fn in (mst_steiner_2approx, steiner_exact, brute_force_steiner):
        with pytest.raises(DisconnectedError):
            fn(net, [1, 1], "ad")
    with pytest.raises(DisconnectedError):
        node_weighted_steiner_greedy(net, [1, 1], {}, "ad")


def test_mst_gap_instance():
    # three terminals around a hub: MST pays 4, the hub tree pays 3
    net = SubstrateNetwork.build("habc", [("h", "a", 1), ("h", "b", 1), ("h", "c", 1),
                                          ("a", "b", 2), ("b", "c", 2)])
    w = [1, 1, 1, 2, 2]
    _, approx = mst_steiner_2approx(net, w, "abc")
    _, exact = steiner_exact(net, w, "abc")
    assert exact == 3
    assert exact <= approx <= 2 * exact


def test_node_weighted_zero_costs(triangle):
    tree, nodes, cost = node_weighted_steiner_greedy(triangle, [5, 1, 1], {}, "ab")
    assert tree == [1, 2] and nodes == ["a", "b", "c"] and cost == 2


def test_node_weighted_two_routes():
    net = SubstrateNetwork.build("abm", [("a", "b", 1), ("a", "m", 1), ("m", "b", 1)])
    tree, nodes, cost = node_weighted_steiner_greedy(net, [5, 1, 1], {"m": 1}, "ab")
    assert (tree, cost) == ([1, 2], 3)
    tree, _, cost = node_weighted_steiner_greedy(net, [5, 1, 1], {"m": 4}, "ab")
    assert (tree, cost) == ([0], 5)


def test_node_weighted_three_on_path():
    names = [f"p{i}" for i in range(7)]
    net = SubstrateNetwork.build(names, [(names[i], names[i + 1], 1) for i in range(6)])
    node_cost = {v: 1 + i % 3 for i, v in enumerate(names)}
    terms = ["p0", "p3", "p6"]
    _, _, cost = node_weighted_steiner_greedy(net, [1] * 6, node_cost, terms)
    _, opt = brute_force_node_weighted(net, [1] * 6, node_cost, terms)
    assert opt <= cost <= 2 * math.log(3) * opt + 1e-9


def test_steiner_exact_matches_brute_force_on_random_graphs():
    rng = random.Random(7)
    for _ in range(40):
        n = rng.randint(4, 8)
        nodes = [f"v{i}" for i in range(n)]
        pairs = list(itertools.combinations(nodes, 2))
        rng.shuffle(pairs)
        edges = pairs[:rng.randint(n - 1, min(len(pairs), 12))]
        net = SubstrateNetwork.build(nodes, [(u, v, 1) for u, v in edges])
        w = [float(rng.randint(0, 6)) for _ in edges]
        terms = rng.sample(nodes, rng.randint(2, min(5, n)))
        try:
            _, ref = brute_force_steiner(net, w, terms)
        except DisconnectedError:
            continue
        tree, cost = steiner_exact(net, w, terms)
        assert cost == pytest.approx(ref)
        assert sum(w[e] for e in tree) == pytest.approx(cost)


# -- oracle properties -------------------------------------------------------------------

SMALL = SubstrateNetwork.build(
    "abcde", [("a", "b", 3), ("b", "c", 2), ("c", "d", 4), ("d", "a", 2), ("a", "c", 3), ("b", "e", 4),
              ("e", "d", 3)])

price_lists = st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0, 2.0, 3.0]), min_size=7, max_size=7)


@st.composite
def small_requests(draw):
    terms = draw(st.lists(st.sampled_from("abcde"), min_size=2, max_size=4, unique=True))
    kind = draw(st.sampled_from(["agg", "hose", "pipe"]))
    if kind == "agg":
        return agg(1, terms, ingress=draw(st.integers(1, 3)))
    if kind == "hose":
        return hose({t: 1 for t in terms}, {t: draw(st.integers(1, 2)) for t in terms})
    return pipe({(terms[0], t): draw(st.integers(1, 2)) for t in terms[1:]})


@settings(max_examples=80, deadline=None)
@given(small_requests(), price_lists)
def test_returned_embeddings_are_feasible_and_priced(req, prices):
    eff = EffectivePrices(dict(enumerate(prices)))
    try:
        res = find_embedding(SMALL, eff, req, OracleOptions(steiner="exact"))
    except EmbeddingRejected:
        assert not enumerate_embeddings(SMALL, req).embeddings or req.traffic.kind == "customer_pipe"
        return
    emb = res.embedding
    assert emb.total() > 0
    assert all(a <= SMALL.edge_capacity[e] + 1e-9 for e, a in emb.edge_reservation.items())
    assert all(a == 0 or a >= 1 - 1e-9 for a in emb.edge_reservation.values())
    assert res.gamma == pytest.approx(emb.cost(eff), abs=1e-9)
    assert res.gamma >= 0


@settings(max_examples=60, deadline=None)
@given(small_requests(), price_lists, st.integers(0, 6), st.sampled_from([0.5, 1.0, 4.0]))
def test_gamma_monotone_in_prices(req, prices, e, bump):
    opts = OracleOptions(steiner="exact")
    lo = EffectivePrices(dict(enumerate(prices)))
    hi_prices = list(prices)
    hi_prices[e] += bump
    hi = EffectivePrices(dict(enumerate(hi_prices)))
    try:
        g_lo = find_embedding(SMALL, lo, req, opts).gamma
    except EmbeddingRejected:
        return
    g_hi = find_embedding(SMALL, hi, req, opts).gamma
    assert g_hi >= g_lo - 1e-9


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from("abcde"), min_size=2, max_size=5, unique=True), price_lists,
       st.integers(1, 3))
def test_aggregate_within_twice_brute_force(terms, prices, ingress):
    eff = EffectivePrices(dict(enumerate(prices)))
    req = agg(1, terms, ingress=ingress)
    cols = enumerate_embeddings(SMALL, req).embeddings
    try:
        res = oracle_aggregate_tree(SMALL, eff, req)
    except EmbeddingRejected:
        assert not cols
        return
    best = min(c.cost(eff) for c in cols)
    assert best - 1e-9 <= res.gamma <= 2 * best + 1e-9


@settings(max_examples=40, deadline=None)
@given(small_requests(), price_lists)
def test_hose_oracle_is_the_brute_force_minimum(req, prices):
    if req.traffic.kind != "hose":
        return
    eff = EffectivePrices(dict(enumerate(prices)))
    cols = enumerate_embeddings(SMALL, req).embeddings
    try:
        res = oracle_hose_tree_exact(SMALL, eff, req)
    except EmbeddingRejected:
        assert not cols
        return
    assert res.gamma == min(c.cost(eff) for c in cols)


def test_pipe_matches_scipy_min_cost_flow():
    from scipy.optimize import linprog
    import numpy as np
    rng = random.Random(3)
    for _ in range(25):
        prices = [rng.choice([0.0, 0.5, 1.0, 2.0]) for _ in range(SMALL.num_edges)]
        s, t, u = rng.sample("abcde", 3)
        demands = {(s, t): rng.randint(1, 2), (s, u): 1}
        eff = EffectivePrices(dict(enumerate(prices)))
        try:
            res = oracle_customer_pipe_mcf(SMALL, eff, pipe(demands), OracleOptions(min_load_floor=1e-6))
        except EmbeddingRejected:
            res = None
        # independent arc-flow model
        m, comm = SMALL.num_edges, sorted(demands.items())
        nv = 2 * m * len(comm)
        cost = np.tile(np.repeat(prices, 2), len(comm))
        a_eq, b_eq = [], []
        for k, ((src, dst), d) in enumerate(comm):
            for v in SMALL.nodes:
                row = np.zeros(nv)
                for e, (x, y) in enumerate(SMALL.edges):
                    if v in (x, y):
                        out_col = 2 * e if v == x else 2 * e + 1
                        row[k * 2 * m + out_col] += 1
                        row[k * 2 * m + (4 * e + 1 - out_col)] -= 1
                a_eq.append(row)
                b_eq.append(d if v == src else -d if v == dst else 0)
        a_ub = np.zeros((m, nv))
        for k in range(len(comm)):
            for e in range(m):
                a_ub[e, k * 2 * m + 2 * e] = a_ub[e, k * 2 * m + 2 * e + 1] = 1
        ref = linprog(cost, A_ub=a_ub, b_ub=SMALL.edge_capacity, A_eq=np.array(a_eq), b_eq=b_eq,
                      method="highs")
        assert (res is None) == (ref.status == 2)
        if res is not None:
            assert res.gamma == pytest.approx(ref.fun, abs=1e-7)
