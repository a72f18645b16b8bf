"""Federation endpoint: decomposes multi-SERVICE queries and joins results locally."""

from .engine import ExecStats, FederationEngine, FederationError, run_federated, stats_classify_trivial
from .plan import (
    FederatedPlan, LocalFilter, LocalJoin, LocalModifiers, LocalUnion, LocalValues, PlanError, Planner,
    RemoteFetch, decompose,
)
