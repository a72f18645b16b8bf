"""SPARQL subset: parser, serializer, transforms, and a reference evaluator."""

from .ast import BGP, BinOp, Call, Count, Filter, GraphPattern, Join, Not, Query, Service, Union, Values
from .evaluate import apply_modifiers, evaluate_pattern, evaluate_query
from .parser import parse_query
from .serializer import serialize_query
from .transforms import (
    build_trivial_federation, certain_variables, classify_splits, count_services,
    pattern_variables, service_endpoints, triple_patterns, unwrap_single_service,
)
