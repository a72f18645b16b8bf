"""Federated SPARQL toolkit: endpoint client and simulator, federation engine,
VoID catalogue, MCP tool server, and a benchmark shard generator."""

__version__ = "0.1.0"
