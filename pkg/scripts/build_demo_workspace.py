#!/usr/bin/env python3
"""Build a complete synthetic demo workspace end to end and print how to serve
it. Everything runs through the CLI so the artifacts match a manual session.

Usage:
  python scripts/build_demo_workspace.py [--workspace demo_ws] [--seed 0]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from graphlens.cli import main as cli  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workspace", default="demo_ws")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    base = ["--workspace", args.workspace, "--seed", str(args.seed)]

    steps = [
        base + ["generate", "--blocks", "3", "--block-size", "60", "--p-in", "0.15",
                "--p-out", "0.02", "--informative", "6", "--noise", "4",
                "--separation", "1.2"],
        base + ["train", "--arch", "appnp", "--hidden", "32", "--epochs", "150"],
        base + ["distill", "--student", "mlp", "--hidden", "32", "--epochs", "300"],
        base + ["attribute", "component"],
        base + ["attribute", "feature", "--instances", "12", "--samples", "512"],
        base + ["attribute", "structure", "--student", "sgat", "--hidden", "32",
                "--epochs", "150"],
        base + ["serve", "--validate-only"],
    ]
    for argv in steps:
        print(f"\n$ graphlens {' '.join(argv)}")
        code = cli(argv)
        if code != 0:
            return code
    print(f"\nworkspace ready. serve it with:\n  graphlens --workspace {args.workspace} serve")
    print("then open frontend/index.html (e.g. `cd frontend && npm run serve`).")
    return 0


if __name__ == "__main__":
    sys.exit(main())
