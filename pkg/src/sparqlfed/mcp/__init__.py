"""MCP server exposing federated querying and VoID retrieval as tools."""

from .config import ConfigError, ServerConfig, build_server, load_config
from .server import McpServer, RpcError, Session
from .tools import Tool, ToolError, default_tools
from .transports import HttpTransport, serve_stdio

__all__ = ["ConfigError", "ServerConfig", "build_server", "load_config", "McpServer", "RpcError", "Session",
           "Tool", "ToolError", "default_tools", "HttpTransport", "serve_stdio"]
