#!/usr/bin/env python3
"""External reimplementation of the built-in s2 system:
c = 2a + b, d = a + 10 - b."""
import json
import sys

for line in sys.stdin:
    msg = json.loads(line)
    cmd = msg.get("cmd")
    if cmd == "reset":
        continue
    if cmd == "step":
        a = msg["inputs"]["a"]
        b = msg["inputs"]["b"]
        reply = {"outputs": {"c": 2.0 * a + b, "d": a + 10.0 - b}}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()
    elif cmd == "end":
        continue
    else:
        sys.exit(1)
