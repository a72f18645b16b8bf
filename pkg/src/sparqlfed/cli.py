"""Command-line entry point: `sparqlfed <command> ...`.

Exit codes: 0 success, 1 user error (bad input, bad flags), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__

log = logging.getLogger("sparqlfed")

USER_ERROR = 1
RUNTIME_ERROR = 2


class UserError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


def _read_graph(path: str):
    from .turtle import load_graph
    try:
        return load_graph(path, skolem=True)
    except FileNotFoundError:
        raise UserError(f"file not found: {path}") from None


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False)


# --- shard ------------------------------------------------------------------------

def cmd_shard(args) -> int:
    from .shardgen import Axioms, build_shards, load_workload, write_outputs
    data = _read_graph(args.dataset)
    ontology = _read_graph(args.ontology) if args.ontology else None
    try:
        queries, warnings = load_workload(args.workload, Axioms.from_graphs(data, ontology))
    except FileNotFoundError:
        raise UserError(f"file not found: {args.workload}") from None
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not queries:
        raise UserError("no queries: the workload holds no usable BGP query")
    result = build_shards(data, queries, ontology, k=args.k, exact_limit=args.exact_threshold,
                          closure=not args.no_closure)
    manifest = write_outputs(result, args.out, void=not args.no_void)
    m = manifest["metrics"]
    print(f"{len(result.selected)} rules, {m['shard_count']} non-empty shards, "
          f"coverage {m['coverage']:.1%}; manifest at {Path(args.out) / 'manifest.json'}")
    for c in result.selected:
        print(f"  {c.rule.label()} covers {len(c.covered)} queries")
    if result.uncovered:
        print(f"error: {len(result.uncovered)} queries cannot be federated: {', '.join(result.uncovered)}",
              file=sys.stderr)
        return RUNTIME_ERROR
    return 0


# --- check ------------------------------------------------------------------------

def load_shards(manifest_path: str | Path):
    """(manifest, {shard id: Graph}) from a manifest written by `shard`."""
    from .turtle import load_graph
    path = Path(manifest_path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UserError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UserError(f"{path} is not JSON: {exc}") from None
    if manifest.get("format", "").split("/")[0] != "sparqlfed-shards":
        raise UserError(f"{path} is not a shard manifest")
    graphs = {}
    for s in manifest["shards"]:
        if "file" not in s:
            raise UserError(f"shard {s['id']} has no file in the manifest")
        graphs[s["id"]] = load_graph(path.parent / s["file"], skolem=False)
    return manifest, graphs


def check_partition(graph, shard_graphs: dict) -> list[str]:
    """Problems with the partition property; empty when shards ∪ base = G and shards are disjoint."""
    problems = []
    seen = {}
    for sid, g in shard_graphs.items():
        for t in g:
            if t in seen:
                problems.append(f"triple {tuple(map(str, t))} is in both {seen[t]} and {sid}")
            else:
                seen[t] = sid
            if t not in graph:
                problems.append(f"shard {sid} holds a triple not in the dataset: {tuple(map(str, t))}")
    missing = [t for t in graph if t not in seen]
    if missing:
        problems.append(f"{len(missing)} dataset triples are in no shard, e.g. {tuple(map(str, missing[0]))}")
    return problems


def cmd_check(args) -> int:
    from .graph import infer_type_closure
    manifest, shards = load_shards(args.manifest)
    data = _read_graph(args.dataset)
    ontology = _read_graph(args.ontology) if args.ontology else None
    graph = infer_type_closure(data, ontology) if manifest["parameters"].get("type_closure") else data
    problems = check_partition(graph, shards)
    for s in manifest["shards"]:
        if len(shards[s["id"]]) != s["triples"]:
            problems.append(f"shard {s['id']}: manifest says {s['triples']} triples, file has {len(shards[s['id']])}")
    for p in problems[:50]:
        print(f"error: {p}", file=sys.stderr)
    if problems:
        return RUNTIME_ERROR
    print(f"ok: {len(shards)} shards partition {len(graph)} triples")
    return 0


# --- fanout -----------------------------------------------------------------------

def cmd_fanout(args) -> int:
    from .graph import Graph
    from .shardgen import Axioms, ShardAssignment, compute_fanout, load_workload
    from .shardgen.materialize import Shard
    manifest, shards = load_shards(args.manifest)
    graph = Graph()
    owner = {}
    for sid, g in shards.items():
        graph.update(g)
        for t in g:
            owner[t] = sid
    assignment = ShardAssignment([], [Shard(sid, g) for sid, g in shards.items()], owner)
    try:
        queries, warnings = load_workload(args.workload, Axioms.from_graphs(graph))
    except FileNotFoundError:
        raise UserError(f"file not found: {args.workload}") from None
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    covered = {q["id"]: q["covered"] for q in manifest.get("queries", [])}
    rows = []
    for q in queries:
        f = compute_fanout(q, assignment, graph)
        rows.append({**f.to_json(), "covered": covered.get(q.id)})
    if args.json:
        print(_dump(rows))
        return 0
    print(f"{'query':<24} {'f(Q)':>5} {'realized':>8} {'answers':>8}  covered")
    for r in rows:
        flag = {True: "yes", False: "no", None: "?"}[r["covered"]]
        print(f"{r['query']:<24} {r['f']:>5} {r['realized']:>8} {r['answers']:>8}  {flag}")
    if rows:
        mean_f = sum(r["f"] for r in rows) / len(rows)
        print(f"mean f(Q) {mean_f:.2f}; realized <= f(Q) on {sum(r['realized'] <= r['f'] for r in rows)}"
              f"/{len(rows)} queries")
    return 0


# --- sim --------------------------------------------------------------------------

def descriptor_from_manifest(manifest: dict, base_port: int = 0) -> dict:
    endpoints = []
    for i, s in enumerate(manifest["shards"]):
        endpoints.append({"shard_file": s["file"], "port": base_port + i if base_port else 0, "label": s["id"],
                          "description": s.get("selector") or "triples not matched by any sharding rule"})
    return {"endpoints": endpoints}


def cmd_sim(args) -> int:
    from .catalogue import Catalogue
    from .client import EndpointError, SparqlClient
    from .sim import launch_deployment
    path = Path(args.descriptor)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UserError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UserError(f"{path} is not JSON: {exc}") from None
    if "shards" in doc:
        doc = descriptor_from_manifest(doc, args.base_port)
    catalogue_path = Path(args.catalogue or doc.get("catalogue") or path.parent / "catalogue.json")
    try:
        deployment = launch_deployment(doc, path.parent)
    except OSError as exc:
        raise RuntimeFailure(f"could not start simulators: {exc}") from None
    except (KeyError, ValueError) as exc:
        raise UserError(f"bad deployment descriptor: {exc}") from None
    with deployment:
        with SparqlClient(timeout=5) as client:
            for url in deployment.urls:
                try:
                    if client.execute(url, "ASK {}") is not True:
                        raise RuntimeFailure(f"health probe failed on {url}")
                except EndpointError as exc:
                    raise RuntimeFailure(f"health probe failed on {url}: {exc}") from None
        if catalogue_path.exists():
            log.info("replacing existing catalogue %s", catalogue_path)
            catalogue_path.unlink()
        catalogue = Catalogue(catalogue_path)
        deployment.register(catalogue)
        for url, label in zip(deployment.urls, deployment.labels):
            print(f"{label}\t{url}", flush=True)
        print(f"catalogue written to {catalogue_path}", flush=True)
        try:
            if args.duration is not None:
                time.sleep(args.duration)
            else:
                while True:
                    time.sleep(3600)
        except KeyboardInterrupt:
            pass
    return 0


# --- serve ------------------------------------------------------------------------

def cmd_serve(args) -> int:
    from .mcp import ConfigError, HttpTransport, ServerConfig, build_server, load_config, serve_stdio
    try:
        if args.config:
            config = load_config(args.config)
        elif args.catalogue:
            config = ServerConfig(args.catalogue)
        else:
            raise UserError("serve needs --config or --catalogue")
        if args.http:
            config.transport = "http"
        if args.port is not None:
            config.port = args.port
    except ConfigError as exc:
        raise UserError(str(exc)) from None
    if not Path(config.catalogue).exists():
        raise UserError(f"catalogue not found: {config.catalogue}")
    server = build_server(config)
    try:
        if config.transport == "stdio":
            serve_stdio(server)
            return 0
        try:
            transport = HttpTransport(server, config.host, config.port)
        except OSError as exc:
            raise RuntimeFailure(f"cannot listen on {config.host}:{config.port}: {exc}") from None
        print(f"MCP endpoint at {transport.url}", file=sys.stderr, flush=True)
        try:
            if args.duration is not None:
                time.sleep(args.duration)
            else:
                while True:
                    time.sleep(3600)
        except KeyboardInterrupt:
            pass
        transport.close()
        return 0
    finally:
        server.close()


# --- query ------------------------------------------------------------------------

def cmd_query(args) -> int:
    from .catalogue import Catalogue
    from .client import SparqlClient
    from .federation import FederationEngine, FederationError
    from .lexer import ParseError
    from .solutions import boolean_json
    if args.file in (None, "-"):
        text = sys.stdin.read()
    else:
        try:
            text = Path(args.file).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise UserError(f"file not found: {args.file}") from None
    catalogue = Catalogue(args.catalogue) if args.catalogue else None
    with SparqlClient(timeout=args.timeout) as client:
        engine = FederationEngine(client, catalogue, args.strategy)
        try:
            result, stats = engine.run(text, deadline=args.timeout)
        except ParseError as exc:
            raise UserError(f"parse error ({exc.kind}): {exc}") from None
        except FederationError as exc:
            if exc.kind in ("no-service", "nested-service", "outside-service", "unsupported"):
                raise UserError(f"{exc.kind}: {exc.message}") from None
            raise RuntimeFailure(f"{exc.kind}: {exc.message}") from None
    doc = boolean_json(result) if isinstance(result, bool) else result.to_json()
    if args.stats:
        doc = {"results": doc, "stats": stats.to_json()}
    print(_dump(doc))
    return 0


# --- void -------------------------------------------------------------------------

def cmd_void(args) -> int:
    from .catalogue import Catalogue, get_void_descriptions
    from .client import EndpointError, SparqlClient, check_endpoint_url
    from .turtle import serialize_turtle
    from .void import PREFIXES
    try:
        check_endpoint_url(args.endpoint)
    except ValueError as exc:
        raise UserError(str(exc)) from None
    catalogue = Catalogue(args.catalogue)
    with SparqlClient(timeout=args.timeout) as client:
        try:
            if args.endpoint not in catalogue:
                client.execute(args.endpoint, "ASK {}")
                catalogue.register(args.endpoint, "", "")
            desc, source = get_void_descriptions(catalogue, client, args.endpoint, extended=args.extended,
                                                 refresh=args.refresh)
        except EndpointError as exc:
            raise RuntimeFailure(f"{exc.kind}: {exc}") from None
    sys.stdout.write(serialize_turtle(desc.to_graph(), PREFIXES))
    print(f"source: {source}", file=sys.stderr)
    return 0


# --- wiring -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparqlfed", description="Federated SPARQL toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("shard", help="partition a dataset so every workload query needs federation")
    s.add_argument("dataset", help="Turtle or N-Triples data file")
    s.add_argument("workload", help="JSON lines with id, question, sparql")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.add_argument("--ontology", help="Turtle file with rdfs:domain / rdfs:range axioms")
    s.add_argument("-k", type=int, default=2, help="shards per horizontal rule (default 2)")
    s.add_argument("--exact-threshold", type=int, default=20,
                   help="solve the cover exactly up to this many candidates (default 20)")
    s.add_argument("--no-closure", action="store_true", help="do not add rdf:type triples implied by axioms")
    s.add_argument("--no-void", action="store_true", help="skip per-shard VoID files")
    s.set_defaults(func=cmd_shard)

    s = sub.add_parser("check", help="verify that the shards of a manifest partition the dataset")
    s.add_argument("manifest")
    s.add_argument("dataset")
    s.add_argument("--ontology")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("fanout", help="fan-out table for a workload over materialized shards")
    s.add_argument("manifest")
    s.add_argument("workload")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_fanout)

    s = sub.add_parser("sim", help="serve shards from a manifest or deployment descriptor")
    s.add_argument("descriptor", help="manifest.json from `shard` or a deployment descriptor")
    s.add_argument("--catalogue", help="catalogue file to write (default: next to the descriptor)")
    s.add_argument("--base-port", type=int, default=0, help="first port; 0 picks free ports")
    s.add_argument("--duration", type=float, help="stop after this many seconds (default: until Ctrl-C)")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("serve", help="run the MCP server")
    s.add_argument("--config", help="server config JSON")
    s.add_argument("--catalogue", help="catalogue JSON (when no config is given)")
    s.add_argument("--http", action="store_true", help="HTTP transport instead of stdio")
    s.add_argument("--port", type=int)
    s.add_argument("--duration", type=float, help="HTTP only: stop after this many seconds")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("query", help="run a SPARQL query with SERVICE clauses")
    s.add_argument("file", nargs="?", help="query file; '-' or omitted reads stdin")
    s.add_argument("--catalogue")
    s.add_argument("--timeout", type=float, default=30.0)
    s.add_argument("--strategy", choices=("hash", "bound"), default="hash")
    s.add_argument("--stats", action="store_true", help="wrap output as {results, stats}")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("void", help="VoID description of an endpoint (Turtle on stdout)")
    s.add_argument("endpoint")
    s.add_argument("--catalogue", required=True)
    s.add_argument("--extended", action="store_true", help="include linksets to other registered endpoints")
    s.add_argument("--refresh", action="store_true", help="ignore the cache")
    s.add_argument("--timeout", type=float, default=30.0)
    s.set_defaults(func=cmd_void)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USER_ERROR if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USER_ERROR
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except Exception as exc:
        from .lexer import ParseError
        if isinstance(exc, ParseError):
            print(f"error: parse error ({exc.kind}): {exc}", file=sys.stderr)
            return USER_ERROR
        log.debug("unexpected failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
