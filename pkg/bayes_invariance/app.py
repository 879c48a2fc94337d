from mcp.server.fastmcp import FastMCP

name = "bayes-invariance-server"

# Create FastMCP instance
mcp = FastMCP(name=name)
