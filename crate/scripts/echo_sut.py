#!/usr/bin/env python3
"""Reference external system: echoes inputs onto the outputs (c := a,
d := b). Speaks the newline-delimited JSON protocol on stdin/stdout."""
import json
import sys

for line in sys.stdin:
    msg = json.loads(line)
    cmd = msg.get("cmd")
    if cmd == "reset":
        continue
    if cmd == "step":
        inputs = msg["inputs"]
        reply = {"outputs": {"c": inputs["a"], "d": inputs["b"]}}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()
    elif cmd == "end":
        continue
    else:
        sys.exit(1)
