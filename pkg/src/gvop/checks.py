"""Run-time guarantees checked against a finished (or running) engine.

Each ``check_*`` returns a list of human-readable violations; an empty list
means the property holds.
"""
from __future__ import annotations

import math
from typing import Dict, List, Sequence

from .engine import GVOP
from .offline import enumerate_embeddings, offline_fractional_opt
from .requests import VNetRequest, validate_request
from .substrate import ValidationError

TOL = 1e-9


def check_lemma(engine: GVOP, tol: float = TOL) -> List[str]:
    """Every price dominates ``(2**(load/c) - 1) / W`` for the largest column weight W."""
    st = engine.state
    bad = []
    if st.w_max == 0:
        return bad
    for r, by_slot in st.load.items():
        c = engine.capacity(r)
        for t, load in sorted(by_slot.items()):
            lower = (2.0 ** (load / c) - 1.0) / st.w_max
            if st.price(r, t) < lower - tol:
                bad.append(f"{r}@{t}: x={st.price(r, t)} < {lower}")
    return bad


def check_congestion(engine: GVOP, tol: float = 1e-6) -> List[str]:
    """Loads stay within ``log2(1 + 3 rho W B / floor)`` capacities and within beta'/beta_rho.

    ``floor`` is the load floor when it is below 1 (entries that small let
    prices climb ``1 / floor`` times higher before the threshold bites).
    """
    st = engine.state
    bad = []
    if not st.accepted:
        return bad
    relax = 1.0 / min(1.0, st.min_load_floor)
    observed = math.log2(1 + 3 * st.rho_max * st.w_max * st.b_max * relax)
    bound = engine.effective_beta() if relax == 1 else math.inf
    for r, by_slot in st.load.items():
        c = engine.capacity(r)
        for t, load in sorted(by_slot.items()):
            if load > observed * c + tol:
                bad.append(f"{r}@{t}: load {load} > {observed} * {c}")
            if load > bound * c + tol:
                bad.append(f"{r}@{t}: load {load} > beta {bound} * {c}")
    return bad


def x_cost(engine: GVOP, emb, slots) -> float:
    st = engine.state
    total = 0.0
    for r, a in emb.entries():
        for t in sorted(slots):
            total += a * st.price(r, t)
    return total


def check_primal_feasibility(engine: GVOP, requests: Sequence[VNetRequest],
                             budget: int = 12, tol: float = TOL) -> List[str]:
    """Covering constraints ``z_j + X.col >= b_j`` over every enumerated column."""
    bad = []
    for req in requests:
        z = engine.state.z.get(req.id, 0.0)
        try:
            validate_request(engine.net, req)
        except ValidationError:  # unsupported requests have no columns
            continue
        cols = enumerate_embeddings(engine._cap_net, req, budget)
        for emb in cols.embeddings:
            lhs = z + x_cost(engine, emb, req.slots)
            if lhs < req.benefit - tol:
                bad.append(f"request {req.id}: {lhs} < {req.benefit}")
    return bad


def check_coupling(engine: GVOP, tol: float = TOL) -> List[str]:
    """Per-request primal increase at most twice the dual increase."""
    bad = []
    for d in engine.decisions:
        if d.primal_increment > 2 * d.dual_increment + tol:
            bad.append(f"request {d.request_id}: dPrimal {d.primal_increment} > "
                       f"2 * dDual {d.dual_increment}")
    return bad


def check_opt(engine: GVOP, requests: Sequence[VNetRequest], budget: int = 12,
              tol: float = 1e-6) -> Dict[str, object]:
    """Compare the run against the offline fractional optimum.

    Weak duality bounds the optimum at the engine's working capacities by
    the final primal value; when the run never overloaded an original
    capacity its benefit cannot beat the optimum at original capacities.
    """
    opt = offline_fractional_opt(engine._cap_net, requests, budget)
    if engine.state.capacity_scale == 1:
        opt_orig = opt
    else:
        opt_orig = offline_fractional_opt(engine.net, requests, budget)
    primal = engine.primal_value()
    dual = engine.dual_value()
    bad = []
    if opt.exact and opt.value > primal + tol:
        bad.append(f"OPT {opt.value} > primal {primal}")
    if opt_orig.exact and engine.max_congestion <= 1 + tol and dual > opt_orig.value + tol:
        bad.append(f"benefit {dual} > OPT {opt_orig.value} with feasible loads")
    return {"opt": opt_orig.value, "exact": opt_orig.exact, "violations": bad}


def verify_run(engine: GVOP, requests: Sequence[VNetRequest], small: bool) -> Dict[str, List[str]]:
    out = {
        "coupling": check_coupling(engine) if engine.state.rho_max == 1 else [],
        "lemma": check_lemma(engine),
        "congestion": check_congestion(engine),
    }
    if small:
        out["primal_feasibility"] = check_primal_feasibility(engine, requests)
        out["opt"] = check_opt(engine, requests)["violations"]
    return out
