"""Out-of-process execution of generated function code.

Generated submodule source is never imported into this process. Each
behavior instance runs in its own Python subprocess and is driven over a
JSON-lines pipe, one request per ``execute`` call.
"""
from __future__ import annotations

import json
import os
import select
import subprocess
import sys

from .sim import ScenarioError

_WORKER = r"""
import json, sys
def reply(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()
hello = json.loads(sys.stdin.readline())
ns = {"__name__": "generated_submodule"}
try:
    exec(compile(hello["source"], "<generated>", "exec"), ns)
    instance = ns[hello["class"]]()
except BaseException as e:
    reply({"error": "%s: %s" % (type(e).__name__, e)})
    sys.exit(0)
reply({"ok": True})
for line in sys.stdin:
    req = json.loads(line)
    try:
        out = instance.execute(**req["inputs"])
        reply({"output": out})
    except BaseException as e:
        reply({"error": "%s: %s" % (type(e).__name__, e)})
"""


class CodeExecutionError(ScenarioError):
    pass


class SubprocessBehavior:
    def __init__(self, source: str, class_name: str, timeout: float = 5.0):
        self.class_name = class_name
        self.timeout = timeout
        env = {k: v for k, v in os.environ.items() if not k.endswith("_API_KEY")}
        self.proc = subprocess.Popen(
            [sys.executable, "-I", "-c", _WORKER],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
            text=True, env=env,
        )
        reply = self._call({"source": source, "class": class_name})
        if "error" in reply:
            self.close()
            raise CodeExecutionError(f"loading {class_name}: {reply['error']}")

    def _call(self, request: dict) -> dict:
        try:
            self.proc.stdin.write(json.dumps(request) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise CodeExecutionError(f"{self.class_name}: worker died ({e})") from None
        ready, _, _ = select.select([self.proc.stdout], [], [], self.timeout)
        if not ready:
            self.close()
            raise CodeExecutionError(f"{self.class_name}: no reply within {self.timeout} s")
        line = self.proc.stdout.readline()
        if not line:
            raise CodeExecutionError(f"{self.class_name}: worker exited")
        return json.loads(line)

    def execute(self, **inputs):
        reply = self._call({"inputs": inputs})
        if "error" in reply:
            raise CodeExecutionError(f"{self.class_name}.execute: {reply['error']}")
        return reply["output"]

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        if self.proc.stdout:
            self.proc.stdout.close()


def code_factory(source: str, class_name: str):
    return lambda: SubprocessBehavior(source, class_name)
