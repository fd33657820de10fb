"""Online primal-dual admission engine (GVOP).

Prices live on (resource, time slot) rows and are created lazily.  A
request is accepted when its cheapest embedding costs less than ``rho``
times its benefit; accepted embeddings raise the prices of the rows they
use multiplicatively.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .oracles import (EffectivePrices, EmbeddingRejected, OracleOptions, OracleResult,
                      find_embedding)
from .requests import Embedding, UnsupportedModelError, VNetRequest, validate_request
from .substrate import EdgeResource, NodeResource, SubstrateNetwork

TOL = 1e-9


class InvariantViolation(AssertionError):
    """An oracle returned a column outside the admissible set (a bug)."""


class Reason(str, enum.Enum):
    PRICE = "price too high"
    INFEASIBLE = "infeasible"
    UNSUPPORTED = "unsupported model"


@dataclass
class Decision:
    request_id: int
    accepted: bool
    reason: Optional[Reason] = None
    embedding: Optional[Embedding] = None
    gamma: Optional[float] = None
    rho: Optional[float] = None
    z: float = 0.0
    primal_increment: float = 0.0
    dual_increment: float = 0.0


@dataclass
class EngineConfig:
    """Engine settings.

    ``force_rho`` declares a larger approximation factor than the oracle's
    own (it can only loosen the acceptance threshold, never tighten it).
    """

    capacity_scale: float = 1.0
    min_load_floor: float = 1.0
    steiner: str = "mst"
    force_rho: Optional[float] = None
    hose_edge_budget: int = 12

    def oracle_options(self) -> OracleOptions:
        return OracleOptions(self.steiner, self.min_load_floor, self.hose_edge_budget)


@dataclass
class Accepted:
    request: VNetRequest
    embedding: Embedding
    gamma: float
    rho: float
    z: float


@dataclass
class PriceState:
    """Covering variables and run accumulators.

    ``x[resource][slot]`` is the price of one time-expanded row; missing
    entries are zero.  ``load`` mirrors ``x`` with the reserved amount.
    """

    x: Dict[object, Dict[int, float]] = field(default_factory=dict)
    load: Dict[object, Dict[int, float]] = field(default_factory=dict)
    z: Dict[int, float] = field(default_factory=dict)
    accepted: Dict[int, Accepted] = field(default_factory=dict)
    capacity_scale: float = 1.0
    min_load_floor: float = 1.0
    primal: float = 0.0
    dual: float = 0.0
    w_max: float = 0.0
    w_slot_max: float = 0.0
    b_max: float = 0.0
    t_max: int = 0
    rho_max: float = 1.0

    def price(self, r, t: int) -> float:
        return self.x.get(r, {}).get(t, 0.0)

    def rows(self):
        """Yield ``(resource, slot, price)`` for every materialized row."""
        for r, by_slot in self.x.items():
            for t in sorted(by_slot):
                yield r, t, by_slot[t]


def column_weight(emb: Embedding, slots) -> float:
    w = len(slots) * emb.total()
    if not w > 0:
        raise ValueError("zero column: the embedding reserves nothing")
    return w


def beta_bounds(w: float, b: float, t_max: int = 1, rho: float = 1.0):
    """``(beta, beta_prime, beta_rho)`` for per-slot column weight ``w``."""
    beta = math.log2(1 + 3 * w * b)
    beta_prime = math.log2(1 + 3 * t_max * w * b)
    beta_rho = rho * math.log2(1 + 3 * rho * t_max * w * b)
    return beta, beta_prime, beta_rho


@dataclass
class CongestionReport:
    ratio: Dict[Tuple[object, int], float]
    max: float


class GVOP:
    """Online all-or-nothing embedding engine over one substrate network."""

    def __init__(self, net: SubstrateNetwork, config: Optional[EngineConfig] = None):
        self.net = net
        self.config = config or EngineConfig()
        self.state = PriceState(min_load_floor=self.config.min_load_floor)
        self._cap_net = net
        self.decisions: List[Decision] = []
        self.log: List[dict] = []
        self.max_congestion = 0.0
        self.processed = 0
        self.last_arrival: Optional[int] = None
        self._seen: set = set()
        if self.config.capacity_scale != 1.0:
            self.configure_scaled_capacities(self.config.capacity_scale)

    # -- configuration -----------------------------------------------------

    def configure_scaled_capacities(self, beta: float) -> None:
        """Run with every capacity divided by ``beta`` from now on."""
        if self.processed:
            raise RuntimeError("capacities must be scaled before the first request")
        if not beta >= 1:
            raise ValueError("scale factor must be at least 1")
        self.state.capacity_scale = float(beta)
        self.config.capacity_scale = float(beta)
        self._cap_net = self.net if beta == 1 else self.net.scaled(beta)

    def capacity(self, r) -> float:
        """Capacity used by prices and feasibility (scaled in scaled mode)."""
        return self._cap_net.capacity(r)

    # -- prices --------------------------------------------------------------

    def effective_prices(self, req: VNetRequest) -> EffectivePrices:
        slots = sorted(req.slots)
        prices = EffectivePrices()
        for r, by_slot in self.state.x.items():
            p = 0.0
            for t in slots:
                p += by_slot.get(t, 0.0)
            if isinstance(r, EdgeResource):
                prices.edge_price[r.index] = p
            else:
                prices.node_price[r.node] = p
        return prices

    # -- main loop -------------------------------------------------------------

    def process(self, req: VNetRequest) -> Decision:
        st = self.state
        try:
            validate_request(self.net, req)
        except UnsupportedModelError:
            return self._record(Decision(req.id, False, Reason.UNSUPPORTED))
        if req.id in self._seen:
            raise ValueError(f"request id {req.id} was already processed")
        if self.last_arrival is not None and req.arrival < self.last_arrival:
            raise ValueError(f"request {req.id} arrives before its predecessor")
        self.last_arrival = req.arrival
        self._seen.add(req.id)
        self.processed += 1

        if 0 < req.packet_rate < st.min_load_floor - TOL:
            return self._record(Decision(req.id, False, Reason.INFEASIBLE))
        prices = self.effective_prices(req)
        try:
            res = find_embedding(self._cap_net, prices, req, self.config.oracle_options())
        except EmbeddingRejected:
            return self._record(Decision(req.id, False, Reason.INFEASIBLE))
        self._check_column(res, prices)

        rho = max(res.rho, self.config.force_rho or 1.0)
        emb, gamma = res.embedding, res.gamma
        w = column_weight(emb, req.slots)
        if not gamma < rho * req.benefit:
            return self._record(Decision(req.id, False, Reason.PRICE, emb, gamma, rho))

        # maxima over accepted columns are all the bounds need
        st.w_max = max(st.w_max, w)
        st.w_slot_max = max(st.w_slot_max, w / req.duration)
        st.b_max = max(st.b_max, req.benefit)
        st.t_max = max(st.t_max, req.duration)
        st.rho_max = max(st.rho_max, rho)

        z = rho * req.benefit - gamma / rho
        before = st.primal
        slots = sorted(req.slots)
        for r, a in emb.entries():
            c = self.capacity(r)
            grow = 2.0 ** (a / c)
            xs = st.x.setdefault(r, {})
            ls = st.load.setdefault(r, {})
            c0 = self.net.capacity(r)
            for t in slots:
                old = xs.get(t, 0.0)
                new = old * grow + (grow - 1.0) / w
                xs[t] = new
                st.primal += (new - old) * c
                ls[t] = ls.get(t, 0.0) + a
                self.max_congestion = max(self.max_congestion, ls[t] / c0)
        st.primal += z
        st.z[req.id] = z
        st.dual += req.benefit
        st.accepted[req.id] = Accepted(req, emb, gamma, rho, z)
        return self._record(Decision(req.id, True, None, emb, gamma, rho, z,
                                     st.primal - before, req.benefit))

    def run(self, requests: Iterable[VNetRequest]) -> List[Decision]:
        return [self.process(r) for r in requests]

    def _record(self, d: Decision) -> Decision:
        self.decisions.append(d)
        self.log.append(self._log_record(d))
        return d

    def _check_column(self, res: OracleResult, prices: EffectivePrices) -> None:
        emb = res.embedding
        entries = list(emb.entries())
        if not entries:
            raise InvariantViolation("oracle returned an empty embedding")
        floor = self.state.min_load_floor
        for r, a in entries:
            c = self.capacity(r)
            if a > c * (1 + TOL):
                raise InvariantViolation(f"{r}: reservation {a} exceeds capacity {c}")
            if a < floor - TOL:
                raise InvariantViolation(f"{r}: reservation {a} below floor {floor}")
        g = emb.cost(prices)
        if abs(g - res.gamma) > TOL * max(1.0, abs(g)):
            raise InvariantViolation(f"oracle gamma {res.gamma} != recomputed {g}")

    # -- accounting --------------------------------------------------------------

    def primal_value(self) -> float:
        total = 0.0
        for r, _, p in self.state.rows():
            total += p * self.capacity(r)
        return total + sum(self.state.z.values())

    def dual_value(self) -> float:
        return self.state.dual

    def congestion_report(self, capacities=None) -> CongestionReport:
        """Load over capacity for every touched row.

        ``capacities`` is a network (default: the original, unscaled one) or
        a callable resource -> capacity.
        """
        cap = capacities if capacities is not None else self.net
        cap_of = cap.capacity if isinstance(cap, SubstrateNetwork) else cap
        ratio = {}
        for r, by_slot in self.state.load.items():
            c = cap_of(r)
            for t in sorted(by_slot):
                ratio[(r, t)] = by_slot[t] / c
        return CongestionReport(ratio, max(ratio.values(), default=0.0))

    def theoretical_beta(self):
        st = self.state
        if not self.processed:
            raise RuntimeError("no request processed yet")
        return beta_bounds(st.w_slot_max, st.b_max, max(st.t_max, 1), st.rho_max)

    def effective_beta(self) -> float:
        """The congestion bound that applies to this run."""
        beta, beta_prime, beta_rho = self.theoretical_beta()
        return beta_rho if self.state.rho_max > 1 else beta_prime

    def fractional_solution(self) -> Dict[int, float]:
        if not self.state.accepted:
            return {}
        beta = self.effective_beta()
        return {j: 1.0 / beta for j in self.state.accepted}

    def fractional_benefit(self) -> float:
        if not self.state.accepted:
            return 0.0
        return self.dual_value() / self.effective_beta()

    def _log_record(self, d: Decision) -> dict:
        return {
            "id": d.request_id,
            "decision": "accept" if d.accepted else "reject",
            "reason": d.reason.value if d.reason else None,
            "gamma": d.gamma,
            "rho": d.rho,
            "z": d.z,
            "primal": self.state.primal,
            "dual": self.state.dual,
            "max_congestion": self.max_congestion,
        }
