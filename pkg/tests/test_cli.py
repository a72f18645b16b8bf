import io
import json
import subprocess
import sys

import pytest

from sparqlfed.cli import main
from sparqlfed.sim import SimConfig, SimEndpoint
from sparqlfed.turtle import parse_turtle, serialize_turtle
from sparqlfed.void import VoidDescription

from helpers import CAPTURED_SPARQL, SHIPS, ship_graph


@pytest.fixture
def ship_files(tmp_path):
    data = tmp_path / "ships.ttl"
    data.write_text(serialize_turtle(ship_graph()))
    workload = tmp_path / "queries.jsonl"
    rows = [
        {"id": "captured", "question": "Which ships were captured?", "sparql": CAPTURED_SPARQL},
        {"id": "names", "sparql": f"SELECT * WHERE {{ ?s a <{SHIPS}ship> . ?s <{SHIPS}name> ?n }}"},
    ]
    workload.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return tmp_path, data, workload


def test_shard_check_fanout(ship_files, capsys):
    tmp, data, workload = ship_files
    out = tmp / "shards"
    assert main(["shard", str(data), str(workload), "-o", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert (out / "deployment.json").exists()
    assert all((out / s["file"]).exists() and (out / f"{s['id']}.void.ttl").exists() for s in manifest["shards"])
    assert main(["check", str(out / "manifest.json"), str(data)]) == 0
    assert "ok:" in capsys.readouterr().out
    assert main(["fanout", str(out / "manifest.json"), str(workload), "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert {r["query"] for r in rows} == {"captured", "names"}
    assert all(r["realized"] <= r["f"] and r["covered"] for r in rows)


def test_check_detects_tampering(ship_files, capsys):
    tmp, data, workload = ship_files
    out = tmp / "shards"
    main(["shard", str(data), str(workload), "-o", str(out), "--no-void"])
    manifest = json.loads((out / "manifest.json").read_text())
    victim = out / next(s["file"] for s in manifest["shards"] if s["triples"])
    lines = victim.read_text().splitlines()
    victim.write_text("\n".join(lines[1:]) + "\n")
    assert main(["check", str(out / "manifest.json"), str(data)]) == 2
    assert "no shard" in capsys.readouterr().err


def test_shard_user_errors(ship_files, tmp_path):
    _, data, _ = ship_files
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["shard", str(data), str(empty), "-o", str(tmp_path / "o")]) == 1
    assert main(["shard", str(tmp_path / "nope.ttl"), str(empty), "-o", str(tmp_path / "o")]) == 1
    assert main(["shard", str(data)]) == 1  # argparse error


def test_shard_uncovered_is_runtime_failure(ship_files, capsys):
    tmp, data, _ = ship_files
    workload = tmp / "solo.jsonl"
    workload.write_text(json.dumps({"id": "solo", "sparql": f"SELECT * WHERE {{ <{SHIPS}s0> <{SHIPS}name> ?n }}"}))
    assert main(["shard", str(data), str(workload), "-o", str(tmp / "o")]) == 2
    assert "solo" in capsys.readouterr().err
    assert (tmp / "o" / "manifest.json").exists()


def test_query_command(tmp_path, capsys, monkeypatch):
    with SimEndpoint(SimConfig(graph=ship_graph())) as s:
        qf = tmp_path / "q.rq"
        qf.write_text(f"SELECT (COUNT(*) AS ?n) WHERE {{ SERVICE <{s.url}> {{ ?x a <{SHIPS}ship> }} }}")
        assert main(["query", str(qf), "--stats"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["results"]["results"]["bindings"][0]["n"]["value"] == "30"
        assert doc["stats"]["mode"] == "direct"
        monkeypatch.setattr(sys, "stdin", io.StringIO("SELECT * WHERE { ?s ?p ?o }"))
        assert main(["query"]) == 1  # no SERVICE
        qf.write_text("SELECT * WHERE { SERVICE <x:y> { ?s ?p }")
        assert main(["query", str(qf)]) == 1
    down = SimEndpoint(SimConfig(availability="down"))
    qf.write_text(f"SELECT * WHERE {{ SERVICE <{down.url}> {{ ?s ?p ?o }} }}")
    try:
        assert main(["query", str(qf), "--timeout", "2"]) == 2
    finally:
        down.close()


def test_void_command(tmp_path, capsys):
    cat = tmp_path / "cat.json"
    with SimEndpoint(SimConfig(graph=ship_graph())) as s:
        assert main(["void", s.url, "--catalogue", str(cat)]) == 0
        first = capsys.readouterr()
        assert VoidDescription.from_graph(parse_turtle(first.out), s.url).triples == 90
        assert "source: computed" in first.err
        assert main(["void", s.url, "--catalogue", str(cat)]) == 0
        assert "source: cache" in capsys.readouterr().err
    assert main(["void", "ftp://x", "--catalogue", str(cat)]) == 1


def test_sim_and_serve_subprocesses(ship_files):
    tmp, data, workload = ship_files
    out = tmp / "shards"
    assert main(["shard", str(data), str(workload), "-o", str(out)]) == 0
    cat = tmp / "catalogue.json"
    cat.write_text("stale")
    sim = subprocess.Popen([sys.executable, "-m", "sparqlfed.cli", "sim", str(out / "manifest.json"),
                            "--catalogue", str(cat), "--duration", "20"],
                           stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        lines = []
        while not lines or not lines[-1].startswith("catalogue written"):
            line = sim.stdout.readline()
            assert line, sim.stderr.read()
            lines.append(line.strip())
        urls = [ln.split("\t")[1] for ln in lines[:-1]]
        entries = json.loads(cat.read_text())["endpoints"]
        assert [e["url"] for e in entries] == urls
        messages = [
            {"jsonrpc": "2.0", "id": 1, "method": "initialize", "params": {}},
            {"jsonrpc": "2.0", "id": 2, "method": "tools/call",
             "params": {"name": "list_endpoints", "arguments": {}}},
        ]
        serve = subprocess.run([sys.executable, "-m", "sparqlfed.cli", "serve", "--catalogue", str(cat)],
                               input="".join(json.dumps(m) + "\n" for m in messages),
                               capture_output=True, text=True, timeout=30)
        assert serve.returncode == 0, serve.stderr
        replies = [json.loads(x) for x in serve.stdout.splitlines()]
        listed = replies[1]["result"]["structuredContent"]["endpoints"]
        assert [e["url"] for e in listed] == urls
    finally:
        sim.terminate()
        sim.wait(timeout=10)


def test_serve_needs_catalogue(tmp_path):
    assert main(["serve"]) == 1
    assert main(["serve", "--catalogue", str(tmp_path / "missing.json")]) == 1
