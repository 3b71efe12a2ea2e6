#!/usr/bin/env python3
"""
Smoke test for a running hscaler MCP server

Lists the tools and designs one protocol through MCP.

Requirements:
    - Server running in an HTTP mode (./run-server.sh or ./run-server.sh rest)

Usage:
    ./test-mcp.sh [SCALE_FACTOR]
    uv run python tools/hscaler_mcp_client.py --scale-factor -1
"""

import argparse
import asyncio
import json
import sys

from fastmcp import Client
from fastmcp.client.transports import StreamableHttpTransport


async def check_mcp(url: str, scale_factor: float) -> bool:
    """
    Connect, list tools and call design_protocol

    Args:
        url: MCP endpoint
        scale_factor: Momentum scale factor to design for

    Returns:
        True when the designed protocol passed validation
    """
    print("🧪 Testing hscaler MCP server")
    print("=" * 70)
    print(f"🔗 URL: {url}")

    try:
        async with Client(transport=StreamableHttpTransport(url=url)) as client:
            print("✅ Connected successfully")

            print("\n" + "=" * 70)
            print("📋 Available Tools")
            print("-" * 70)
            tools = await asyncio.wait_for(client.list_tools(), timeout=10.0)
            for tool in tools:
                print(f"🔧 {tool.name}")
                if tool.description:
                    print(f"   {tool.description.splitlines()[0][:100]}")

            print("\n" + "=" * 70)
            print(f"📐 design_protocol(scale_factor={scale_factor:g})")
            print("-" * 70)
            result = await asyncio.wait_for(
                client.call_tool("design_protocol", {"scale_factor": scale_factor, "samples": 11}),
                timeout=30.0
            )
            design = json.loads(result.content[0].text)
            print(f"u(s) coefficients: {design['coefficients']}")
            print(f"Cancelled nodes:   {design['nodes']}")
            print(f"Peak |omega^2|:    {design['peak_abs_omega2']:.6g} at t={design['peak_time']:.6g}")
            print(f"Validation passed: {design['validation']['passed']}")
            return bool(design["validation"]["passed"])

    except asyncio.TimeoutError:
        print("\n❌ Timeout - server not responding")
        return False
    except Exception as e:
        print(f"\n❌ Error: {e}")
        return False


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Smoke test for the hscaler MCP server")
    parser.add_argument("--url", default="http://localhost:3000/mcp", help="MCP endpoint")
    parser.add_argument("--scale-factor", type=float, default=-1.0, help="Momentum scale factor")
    args = parser.parse_args()

    sys.exit(0 if asyncio.run(check_mcp(args.url, args.scale_factor)) else 1)
