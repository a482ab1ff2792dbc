#!/usr/bin/env python3
"""Expose the surrogate plant over the newline-delimited wire protocol.

Stands in for laboratory hardware so the optimizer can be exercised against
`--plant external:<host:port>` end to end.

Usage: python scripts/serve_surrogate.py [--host 127.0.0.1] [--port 5555]
       [--config path.json] [--noise SIGMA]
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from rampopt.plant import SurrogatePlant, default_surrogate_config, load_surrogate_config
from rampopt.protocol import PlantServer, surrogate_responder


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=5555)
    parser.add_argument("--config", default=None)
    parser.add_argument("--noise", type=float, default=None)
    args = parser.parse_args()

    config = load_surrogate_config(args.config) if args.config else default_surrogate_config()
    if args.noise is not None:
        config = replace(config, noise_std=args.noise)
    plant = SurrogatePlant(config)
    server = PlantServer(surrogate_responder(plant), host=args.host, port=args.port)
    server.start()
    print(f"serving surrogate on {server.host}:{server.port} (Ctrl-C to stop)")
    try:
        while True:
            server._thread.join(1.0)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
