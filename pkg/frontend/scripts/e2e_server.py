"""Throwaway session server for the console's end-to-end test.

Binds an ephemeral port, prints it as one JSON line on stdout, then
serves until the process is killed.

Usage: python3 e2e_server.py OUT_DIR [CONFIG_OVERRIDES_JSON]
"""

import asyncio
import json
import os
import sys

from cobotar.config import SessionConfig
from cobotar.server import SessionServer


async def main() -> None:
    out_dir = sys.argv[1]
    overrides = json.loads(sys.argv[2]) if len(sys.argv) > 2 else {}
    cfg = SessionConfig(
        serve_out=os.path.join(out_dir, "e2e-{n}.jsonl"), **overrides
    )
    server = SessionServer(cfg, port=0)
    port = await server.start()
    print(json.dumps({"port": port}), flush=True)
    await asyncio.Event().wait()


if __name__ == "__main__":
    asyncio.run(main())
