"""Online virtual network embedding with primal-dual admission control."""
from .engine import GVOP, Decision, EngineConfig, Reason, beta_bounds, column_weight
from .oracles import EffectivePrices, EmbeddingRejected, OracleOptions, OracleResult
from .requests import (AggregateIngress, CustomerPipe, Embedding, Hose, RoutingModel,
                       VNetRequest, load_requests, validate_request)
from .substrate import EdgeResource, NodeResource, SubstrateNetwork, ValidationError, load_substrate

__version__ = "0.1.0"
