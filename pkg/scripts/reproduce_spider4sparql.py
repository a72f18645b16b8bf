#!/usr/bin/env python3
"""Run the shard generator over a multi-dataset benchmark and compare its
statistics with published reference figures.

Expected layout (one directory per dataset):

    ROOT/<dataset>/data.ttl        (or data.nt; any *.ttl / *.nt other than the ontology)
    ROOT/<dataset>/ontology.ttl    optional rdfs:domain / rdfs:range axioms
    ROOT/<dataset>/queries.jsonl   {"id", "question", "sparql"} per line

Usage: python scripts/reproduce_spider4sparql.py ROOT [--json report.json] [-k 2]

Exit status 0 when the applicability rates are within 1 percentage point of
the reference, 1 otherwise, 2 when the input is unusable.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from sparqlfed.graph import Graph
from sparqlfed.shardgen import Axioms, applicability, build_shards, load_workload
from sparqlfed.turtle import load_graph

REFERENCE = {
    "datasets": 19,
    "applicability_pct": {"class": 40.14, "vertical": 95.94, "horizontal": 100.0},
    "rules_per_dataset": {"mean": 3.7, "median": 4, "min": 2, "max": 8},
    "composition_pct": {"vertical": 18.30, "class": 30.42, "horizontal": 51.28},
    "shards_total": 118,
    "shards_per_dataset": {"min": 3, "max": 14, "median": 6, "mean": 6.21},
    "shard_size_cv_mean": 0.88,
    "fanout": {"mean": 6.48, "median": 6, "min": 2, "max": 14},
    "no_match_pct": 4.84,
    "single_shard_pct": 24.49,
}
APPLICABILITY_TOLERANCE = 1.0  # percentage points


def _dataset_files(d: Path):
    onto = next((p for p in (d / "ontology.ttl", d / "ontology.nt") if p.exists()), None)
    data = [p for p in sorted(d.iterdir()) if p.suffix in (".ttl", ".nt") and p != onto]
    workload = d / "queries.jsonl"
    return data, onto, workload


def reproduce(root: str | Path, k: int = 2, log=print) -> dict:
    root = Path(root)
    dirs = [d for d in sorted(root.iterdir()) if d.is_dir() and (d / "queries.jsonl").exists()]
    if not dirs:
        raise ValueError(f"no dataset directories with queries.jsonl under {root}")
    per_dataset = []
    apps = []
    fanouts = []
    realized = []
    composition_counts = {"vertical": 0, "class": 0, "horizontal": 0}
    for d in dirs:
        data_files, onto_file, workload = _dataset_files(d)
        data = Graph()
        for f in data_files:
            data.update(load_graph(f))
        ontology = load_graph(onto_file) if onto_file else None
        queries, warnings = load_workload(workload, Axioms.from_graphs(data, ontology))
        if not queries:
            log(f"{d.name}: no usable queries, skipped")
            continue
        result = build_shards(data, queries, ontology, k=k)
        m = result.metrics()
        apps += [applicability(q) for q in queries]
        fanouts += [result.fanouts[q.id].fanout for q in queries]
        realized += [result.fanouts[q.id].realized for q in queries]
        for r in result.rules:
            composition_counts[r.kind] += r.shard_count
        per_dataset.append({"dataset": d.name, "queries": len(queries), "skipped": len(warnings),
                            "rules": m["rule_count"], "shards": m["shard_count"], "cv": m["shard_size_cv"],
                            "uncovered": len(result.uncovered)})
        log(f"{d.name}: {len(queries)} queries, {m['rule_count']} rules, {m['shard_count']} shards, "
            f"{len(result.uncovered)} uncovered")
    n = len(apps)
    rules = [x["rules"] for x in per_dataset]
    shards = [x["shards"] for x in per_dataset]
    total_rule_shards = sum(composition_counts.values())
    return {
        "datasets": len(per_dataset),
        "queries": n,
        "applicability_pct": {k_: 100.0 * sum(a[k_] for a in apps) / n for k_ in ("class", "vertical", "horizontal")},
        "rules_per_dataset": _summary(rules),
        "composition_pct": {k_: (100.0 * v / total_rule_shards if total_rule_shards else 0.0)
                            for k_, v in composition_counts.items()},
        "shards_total": sum(shards),
        "shards_per_dataset": _summary(shards),
        "shard_size_cv_mean": statistics.fmean(x["cv"] for x in per_dataset),
        "fanout": _summary(fanouts),
        "no_match_pct": 100.0 * sum(1 for r in realized if r == 0) / n,
        "single_shard_pct": 100.0 * sum(1 for r in realized if r == 1) / n,
        "uncovered": sum(x["uncovered"] for x in per_dataset),
        "per_dataset": per_dataset,
    }


def _summary(values) -> dict:
    return {"mean": statistics.fmean(values), "median": statistics.median(values),
            "min": min(values), "max": max(values)}


def diff(report: dict) -> list[tuple]:
    """(metric, ours, reference) rows for every reference figure."""
    rows = []
    for key, ref in REFERENCE.items():
        ours = report.get(key)
        if isinstance(ref, dict):
            for sub, value in ref.items():
                rows.append((f"{key}.{sub}", ours.get(sub) if ours else None, value))
        else:
            rows.append((key, ours, ref))
    return rows


def applicability_ok(report: dict) -> bool:
    return all(abs(report["applicability_pct"][k] - v) <= APPLICABILITY_TOLERANCE
               for k, v in REFERENCE["applicability_pct"].items())


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("root")
    p.add_argument("--json", help="write the full report here")
    p.add_argument("-k", type=int, default=2)
    args = p.parse_args(argv)
    try:
        report = reproduce(args.root, args.k, log=lambda m: print(m, file=sys.stderr))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{'metric':<34} {'ours':>10} {'reference':>10}")
    for name, ours, ref in diff(report):
        shown = "-" if ours is None else (f"{ours:.2f}" if isinstance(ours, float) else str(ours))
        print(f"{name:<34} {shown:>10} {ref:>10}")
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    ok = applicability_ok(report)
    print(f"applicability within ±{APPLICABILITY_TOLERANCE} pp: {'yes' if ok else 'no'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
