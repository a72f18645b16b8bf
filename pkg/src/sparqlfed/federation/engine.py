"""Plan execution and the query dispatch used by the MCP tool."""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field

from ..client import EndpointError, SparqlClient
from ..solutions import SolutionSet, distinct, join
from ..sparql.ast import BGP, Filter, Join, Query, Service, Union, Values
from ..sparql.evaluate import apply_modifiers
from ..sparql.expressions import filter_passes
from ..sparql.parser import parse_query
from ..sparql.serializer import serialize_query
from ..sparql.transforms import count_services, unwrap_single_service, walk
from .plan import (
    FederatedPlan, LocalFilter, LocalJoin, LocalModifiers, LocalUnion, LocalValues, PlanError, Planner,
    RemoteFetch,
)

log = logging.getLogger(__name__)

BATCH_SIZE = 50


class FederationError(Exception):
    """Execution failure with the statistics gathered so far attached."""

    def __init__(self, kind: str, message: str, stats: "ExecStats | None" = None, cause=None):
        self.kind = kind
        self.message = message
        self.stats = stats
        self.cause = cause
        super().__init__(message)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "message": self.message}
        if isinstance(self.cause, EndpointError):
            out["endpoint"] = self.cause.endpoint
        return out


@dataclass
class EndpointStats:
    requests: int = 0
    rows: int = 0
    elapsed: float = 0.0
    errors: list = field(default_factory=list)


@dataclass
class ExecStats:
    mode: str = ""  # "direct" or "federated"
    strategy: str = ""
    elapsed: float = 0.0
    trivial_federation: bool = False
    endpoints: dict = field(default_factory=dict)  # url -> EndpointStats
    fallbacks: int = 0  # bound joins that fell back to hash joins
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, url: str, rows: int, elapsed: float, error: str | None = None):
        with self._lock:
            s = self.endpoints.setdefault(url, EndpointStats())
            s.requests += 1
            s.rows += rows
            s.elapsed += elapsed
            if error:
                s.errors.append(error)

    @property
    def endpoints_consulted(self) -> list[str]:
        return sorted(u for u, s in self.endpoints.items() if s.requests)

    @property
    def total_requests(self) -> int:
        return sum(s.requests for s in self.endpoints.values())

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "strategy": self.strategy,
            "elapsed": round(self.elapsed, 4),
            "trivial_federation": self.trivial_federation,
            "endpoints_consulted": self.endpoints_consulted,
            "requests": self.total_requests,
            "fallbacks": self.fallbacks,
            "per_endpoint": {u: {"requests": s.requests, "rows": s.rows, "elapsed": round(s.elapsed, 4),
                                 "errors": list(s.errors)}
                             for u, s in sorted(self.endpoints.items())},
        }


class _Run:
    """State of one plan execution."""

    def __init__(self, engine: "FederationEngine", stats: ExecStats, deadline: float):
        self.engine = engine
        self.client = engine.client
        self.stats = stats
        self.deadline = deadline
        self.futures: dict[int, Future] = {}

    def remaining(self) -> float:
        left = self.deadline - time.monotonic()
        if left <= 0:
            raise FederationError("deadline", "overall deadline exceeded", self.stats)
        return min(left, self.client.timeout)

    def fetch(self, f: RemoteFetch, values: Values | None = None) -> list[dict]:
        text = f.query_text(values)
        t0 = time.monotonic()
        try:
            res = self.client.execute(f.endpoint, text, self.remaining())
        except EndpointError as exc:
            self.stats.record(f.endpoint, 0, time.monotonic() - t0, exc.kind)
            refused_values = values is not None and exc.kind == "feature-unsupported"
            if f.silent and not refused_values:
                log.info("silent SERVICE <%s> failed: %s", f.endpoint, exc)
                return []
            raise
        rows = res.bindings if isinstance(res, SolutionSet) else ([{}] if res else [])
        self.stats.record(f.endpoint, len(rows), time.monotonic() - t0)
        return rows

    def run(self, u) -> list[dict]:
        if isinstance(u, RemoteFetch):
            fut = self.futures.get(u.id)
            if fut is None:
                return self.fetch(u)
            left = max(self.deadline - time.monotonic(), 0)
            try:
                return fut.result(timeout=left + 1.0)
            except FutureTimeout:
                raise FederationError("deadline", "overall deadline exceeded", self.stats) from None
        if isinstance(u, LocalJoin):
            left = self.run(u.left)
            if not left:
                return []
            if u.strategy == "bound":
                right = self.bound(u.right, left, u.bind_on)
            else:
                right = self.run(u.right)
            return join(left, right)
        if isinstance(u, LocalUnion):
            out = []
            for branch in u.units:
                out.extend(self.run(branch))
            return out
        if isinstance(u, LocalFilter):
            return [mu for mu in self.run(u.unit) if filter_passes(u.expr, mu)]
        if isinstance(u, LocalValues):
            vs = u.values
            return [{v: t for v, t in zip(vs.variables, row) if t is not None} for row in vs.rows]
        raise TypeError(f"unknown plan unit {u!r}")

    def bound(self, u, left: list[dict], on: tuple) -> list[dict]:
        """Right side of a bound join: fetch only rows matching the left bindings."""
        if isinstance(u, LocalUnion):
            out = []
            for branch in u.units:
                out.extend(self.bound(branch, left, on))
            return out
        if not isinstance(u, RemoteFetch):
            return self.run(u)
        keys = distinct({v: mu[v] for v in on if v in mu} for mu in left)
        size = self.engine.batch_size
        out = []
        for start in range(0, len(keys), size):
            batch = keys[start:start + size]
            values = Values(on, tuple(tuple(k.get(v) for v in on) for k in batch))
            try:
                rows = self.fetch(u, values)
            except EndpointError as exc:
                if exc.kind != "feature-unsupported":
                    raise
                log.info("VALUES refused by %s, using a hash join", u.endpoint)
                with self.stats._lock:
                    self.stats.fallbacks += 1
                return self.fetch(u)
            out.extend(rows)
        return out


def _eager_fetches(u, out: list, under_bound=False):
    """Fetches that do not depend on other results and can start at once."""
    if isinstance(u, RemoteFetch):
        if not under_bound:
            out.append(u)
    elif isinstance(u, LocalJoin):
        _eager_fetches(u.left, out, under_bound)
        _eager_fetches(u.right, out, under_bound or u.strategy == "bound")
    elif isinstance(u, LocalUnion):
        for x in u.units:
            _eager_fetches(x, out, under_bound)
    elif isinstance(u, (LocalFilter, LocalModifiers)):
        _eager_fetches(u.unit, out, under_bound)
    return out


class FederationEngine:
    """Shareable engine; every call gets its own ExecStats and worker pool."""

    def __init__(self, client: SparqlClient, catalogue=None, strategy: str = "hash",
                 batch_size: int = BATCH_SIZE, max_workers: int = 16, planner: Planner | None = None):
        self.client = client
        self.catalogue = catalogue
        self.strategy = strategy
        self.batch_size = batch_size
        self.max_workers = max_workers
        self.planner = planner

    def decompose(self, q: Query, strategy: str | None = None) -> FederatedPlan:
        planner = self.planner or Planner(strategy or self.strategy)
        plan = planner.decompose(q)
        if (strategy or self.strategy) == "bound" and self.catalogue is not None:
            _demote_unbindable(plan.root, self.catalogue)
        return plan

    def execute_plan(self, plan: FederatedPlan, deadline: float = 30.0,
                     stats: ExecStats | None = None) -> tuple[SolutionSet | bool, ExecStats]:
        stats = stats or ExecStats(mode="federated", strategy=self.strategy)
        start = time.monotonic()
        run = _Run(self, stats, start + deadline)
        eager = _eager_fetches(plan.root, [])
        pool = ThreadPoolExecutor(max_workers=max(1, min(self.max_workers, len(eager))),
                                  thread_name_prefix="fetch")
        try:
            for f in eager:
                run.futures[f.id] = pool.submit(run.fetch, f)
            rows = run.run(plan.root.unit)
            result = apply_modifiers(plan.root.query, rows)
        except EndpointError as exc:
            stats.elapsed = time.monotonic() - start
            raise FederationError(exc.kind, str(exc), stats, exc) from exc
        except FederationError as exc:
            stats.elapsed = time.monotonic() - start
            exc.stats = stats
            raise
        finally:
            pool.shutdown(wait=False, cancel_futures=True)
        stats.elapsed = time.monotonic() - start
        return result, stats

    def run(self, query: str | Query, deadline: float = 30.0,
            strategy: str | None = None) -> tuple[SolutionSet | bool, ExecStats]:
        """Dispatch: one SERVICE goes straight to its endpoint, several are federated."""
        q = parse_query(query) if isinstance(query, str) else query
        strategy = strategy or self.strategy
        n = count_services(q)
        stats = ExecStats(strategy=strategy)
        if self.catalogue is not None:
            stats.trivial_federation = stats_classify_trivial(q, self.catalogue)
        if n == 0:
            raise FederationError(
                "no-service", "the query contains no SERVICE clause; wrap the pattern in "
                "SERVICE <endpoint> { ... } naming the endpoint(s) to query", stats)
        if n == 1:
            return self._direct(q, deadline, stats)
        stats.mode = "federated"
        try:
            plan = self.decompose(q, strategy)
        except PlanError as exc:
            raise FederationError(exc.kind, exc.message, stats) from exc
        return self.execute_plan(plan, deadline, stats)

    def _direct(self, q: Query, deadline: float, stats: ExecStats):
        stats.mode = "direct"
        silent = any(isinstance(n, Service) and n.silent for n in walk(q.pattern))
        endpoint, bare = unwrap_single_service(q)
        start = time.monotonic()
        try:
            result = self.client.execute(endpoint, serialize_query(bare), min(deadline, self.client.timeout))
        except EndpointError as exc:
            stats.record(endpoint, 0, time.monotonic() - start, exc.kind)
            stats.elapsed = time.monotonic() - start
            if silent:
                return apply_modifiers(bare, []), stats
            raise FederationError(exc.kind, str(exc), stats, exc) from exc
        rows = len(result.bindings) if isinstance(result, SolutionSet) else 1
        stats.record(endpoint, rows, time.monotonic() - start)
        stats.elapsed = time.monotonic() - start
        return result, stats


def _demote_unbindable(u, catalogue):
    """Use hash joins where the catalogue says the endpoint refuses VALUES."""
    if not hasattr(catalogue, "capabilities"):
        return
    if isinstance(u, LocalJoin):
        if u.strategy == "bound":
            fetches = _eager_fetches(u.right, [])
            for f in fetches:
                caps = catalogue.capabilities(f.endpoint) if f.endpoint in catalogue else None
                if caps is not None and not caps.values_supported:
                    u.strategy, u.bind_on = "hash", ()
                    break
    for child in _children(u):
        _demote_unbindable(child, catalogue)


def _children(u):
    if isinstance(u, LocalJoin):
        return [u.left, u.right]
    if isinstance(u, LocalUnion):
        return u.units
    if isinstance(u, (LocalFilter, LocalModifiers)):
        return [u.unit]
    return []


def _endpoint_set(catalogue) -> set:
    if catalogue is None:
        return set()
    if hasattr(catalogue, "urls"):
        return set(catalogue.urls())
    return set(catalogue)


def stats_classify_trivial(q, catalogue) -> bool:
    """True iff every triple pattern sits in a UNION of single-pattern SERVICE
    calls covering exactly the registered endpoints."""
    endpoints = _endpoint_set(catalogue)
    if not endpoints:
        return False
    p = q.pattern if isinstance(q, Query) else q
    while isinstance(p, Filter):
        p = p.pattern
    units = p.children if isinstance(p, Join) else (p,)
    for unit in units:
        branches = unit.branches if isinstance(unit, Union) else (unit,)
        if not all(isinstance(b, Service) and isinstance(b.pattern, BGP) and len(b.pattern.patterns) == 1
                   for b in branches):
            return False
        if len({b.pattern for b in branches}) != 1:
            return False
        used = [b.endpoint.value for b in branches]
        if len(used) != len(set(used)) or set(used) != endpoints:
            return False
    return True


def run_federated(query: str | Query, catalogue=None, deadline: float = 30.0, client: SparqlClient | None = None,
                  strategy: str = "hash") -> tuple[SolutionSet | bool, ExecStats]:
    own = client is None
    client = client or SparqlClient(timeout=deadline)
    try:
        return FederationEngine(client, catalogue, strategy).run(query, deadline)
    finally:
        if own:
            client.close()


__all__ = ["FederationEngine", "FederationError", "ExecStats", "run_federated", "stats_classify_trivial"]
