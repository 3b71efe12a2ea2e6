#!/usr/bin/env python3
"""
REST smoke test for a running hscaler server (REST mode)

Usage:
    ./test-rest-api.sh
    uv run python tools/hscaler_rest_client.py --base-url http://localhost:3000
"""

import argparse
import json
import sys
from datetime import datetime

import httpx


def print_response(response: httpx.Response, endpoint: str) -> None:
    """Print formatted API response"""
    print(f"\nResponse from {endpoint}:")
    print(f"Status: {response.status_code}")
    try:
        print(json.dumps(response.json(), indent=2)[:2000])
    except ValueError:
        print(response.text)
    print("-" * 70)


def check_rest_api(base_url: str) -> bool:
    """Exercise every REST endpoint once; True when all return 2xx"""
    print(f"🧪 Testing hscaler REST API at {base_url}")
    print("=" * 70)
    print(f"⏰ Time: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    calls = [
        ("GET", "/health", None),
        ("GET", "/", None),
        ("POST", "/protocol", {"mode": "momentum", "scale_factor": -1.0, "samples": 5}),
        ("POST", "/protocol", {"mode": "position", "scale_factor": -0.5, "samples": 0}),
        ("POST", "/moments", {"spec": {"mode": "momentum", "scale_factor": 0.2}, "intervals": 4}),
    ]
    ok = True
    with httpx.Client(base_url=base_url, timeout=30.0) as client:
        for number, (method, path, body) in enumerate(calls, start=1):
            print(f"\n📡 TEST {number}: {method} {path}")
            try:
                response = client.request(method, path, json=body)
                print_response(response, path)
                ok = ok and response.is_success
            except httpx.HTTPError as e:
                print(f"Error: {e}")
                ok = False

    print("\n✅ API testing complete!" if ok else "\n❌ Some requests failed")
    return ok


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="REST smoke test for hscaler")
    parser.add_argument("--base-url", default="http://localhost:3000")
    args = parser.parse_args()
    sys.exit(0 if check_rest_api(args.base_url) else 1)
