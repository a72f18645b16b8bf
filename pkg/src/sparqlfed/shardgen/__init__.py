"""Benchmark shard generation from a dataset and a query workload."""

from .materialize import BASE, Shard, ShardAssignment, materialize_shards
from .metrics import FanOut, coefficient_of_variation, composition, compute_fanout
from .pipeline import ShardgenResult, build_shards, rule_federates, write_outputs
from .rules import Candidate, Router, ShardingRule, fnv1a64, generate_candidates, hash_index
from .setcover import UncoverableError, exact_cover, greedy_cover, solve_set_cover
from .workload import Axioms, WorkloadQuery, applicability, load_workload, make_query, parse_workload, query_sets

__all__ = [
    "BASE", "Shard", "ShardAssignment", "materialize_shards", "FanOut", "coefficient_of_variation",
    "composition", "compute_fanout", "ShardgenResult", "build_shards", "rule_federates", "write_outputs",
    "Candidate", "Router", "ShardingRule", "fnv1a64", "generate_candidates", "hash_index",
    "UncoverableError", "exact_cover", "greedy_cover", "solve_set_cover", "Axioms", "WorkloadQuery",
    "applicability", "load_workload", "make_query", "parse_workload", "query_sets",
]
