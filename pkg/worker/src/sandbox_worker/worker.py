"""Sandboxed execution of candidate programs over an NDJSON stdio protocol.

One JSON request per stdin line:
    {"id": str, "program": str, "entry": str, "inputs": [...], "timeout_s": num}
One JSON reply per request:
    {"id": str, "ok": bool, "results": [{"score": num, "construction": obj|null}],
     "error": str|null, "stderr_tail": str}

Each element of `inputs` is passed to the entry function as a single
positional argument.  Constructions are read from the module-level variable
`CONSTRUCTION`, which the harness code in a spec file assigns after solving;
it is reset to None before every call.

Resource limits are applied before any candidate code runs: an address-space
cap, a cumulative CPU cap (the pool recycles workers per candidate, so the
cap is effectively per candidate), a per-input wall-clock timer and an import
blocker for networking modules.  A candidate failure of any kind produces an
ok=false reply; the request loop itself keeps serving.
"""

from __future__ import annotations

import argparse
import importlib.abc
import io
import json
import math
import os
import signal
import sys
import traceback
import types

CONSTRUCTION_HOOK = "CONSTRUCTION"
STDERR_TAIL_CHARS = 2000

NETWORK_MODULES = {
    "socket", "ssl", "http", "urllib", "requests", "httpx", "ftplib", "smtplib",
    "poplib", "imaplib", "telnetlib", "socketserver", "xmlrpc",
}


class InputTimeout(Exception):
    pass


class _NetworkBlocker(importlib.abc.MetaPathFinder):
    def find_spec(self, fullname, path=None, target=None):
        if fullname.split(".")[0] in NETWORK_MODULES:
            raise ImportError(f"network access is disabled in the sandbox: {fullname}")
        return None


def _funsearch_stub() -> types.ModuleType:
    # Candidate programs carry @funsearch.run / @funsearch.evolve decorator
    # lines; at execution time both are identity decorators.
    mod = types.ModuleType("funsearch")
    mod.run = lambda fn: fn
    mod.evolve = lambda fn: fn
    return mod


def _on_alarm(signum, frame):
    raise InputTimeout("wall-clock limit")


def _on_xcpu(signum, frame):
    raise InputTimeout("cpu limit")


def apply_limits(cpu_seconds: int, mem_bytes: int, workdir: str | None,
                 allow_network: bool):
    import resource
    if workdir:
        os.chdir(workdir)
    if mem_bytes > 0:
        resource.setrlimit(resource.RLIMIT_AS, (mem_bytes, mem_bytes))
    if cpu_seconds > 0:
        resource.setrlimit(resource.RLIMIT_CPU, (cpu_seconds, cpu_seconds + 5))
    if not allow_network:
        sys.meta_path.insert(0, _NetworkBlocker())
    sys.modules["funsearch"] = _funsearch_stub()
    signal.signal(signal.SIGALRM, _on_alarm)
    signal.signal(signal.SIGXCPU, _on_xcpu)


def _coerce_score(value):
    """Returns a JSON-safe finite number, or None if the value is no score.

    Integer-like objects (e.g. numpy integer scalars) are accepted via
    __index__; bools are not scores.
    """
    if isinstance(value, bool):
        return None
    if not isinstance(value, (int, float)):
        try:
            value = int(value.__index__())
        except (AttributeError, TypeError):
            return None
    return value if math.isfinite(value) else None


def _jsonable(obj):
    if obj is None:
        return None
    try:
        json.dumps(obj)
        return obj
    except (TypeError, ValueError):
        return None


def handle_request(request: dict) -> dict:
    rid = str(request.get("id", ""))
    reply = {"id": rid, "ok": False, "results": [], "error": None, "stderr_tail": ""}
    program = request.get("program")
    entry = request.get("entry")
    inputs = request.get("inputs")
    timeout_s = float(request.get("timeout_s") or 0)
    if not isinstance(program, str) or not isinstance(entry, str) \
            or not isinstance(inputs, list):
        reply["error"] = "bad-request"
        return reply

    capture = io.StringIO()
    saved_out, saved_err = sys.stdout, sys.stderr
    sys.stdout = sys.stderr = capture
    try:
        namespace: dict = {"__name__": "__candidate__", CONSTRUCTION_HOOK: None}
        if timeout_s > 0:
            signal.setitimer(signal.ITIMER_REAL, timeout_s)
        try:
            exec(compile(program, "<candidate>", "exec"), namespace)
        finally:
            signal.setitimer(signal.ITIMER_REAL, 0)
        fn = namespace.get(entry)
        if not callable(fn):
            reply["error"] = f"missing-entry: {entry!r} is not a function"
            return reply

        results = []
        for index, value in enumerate(inputs):
            namespace[CONSTRUCTION_HOOK] = None
            if timeout_s > 0:
                signal.setitimer(signal.ITIMER_REAL, timeout_s)
            try:
                raw = fn(value)
            finally:
                signal.setitimer(signal.ITIMER_REAL, 0)
            score = _coerce_score(raw)
            if score is None:
                reply["error"] = f"invalid-score: input {index} returned {raw!r}"
                return reply
            results.append({"score": score,
                            "construction": _jsonable(namespace.get(CONSTRUCTION_HOOK))})
        reply["results"] = results
        reply["ok"] = True
        return reply
    except InputTimeout as exc:
        reply["error"] = f"timeout: {exc}"
        return reply
    except MemoryError:
        reply["error"] = "memory: candidate exceeded the address-space cap"
        return reply
    except SyntaxError as exc:
        reply["error"] = f"compile-error: {exc.msg} (line {exc.lineno})"
        return reply
    except BaseException as exc:
        reply["error"] = f"{type(exc).__name__}: {exc}"
        capture.write(traceback.format_exc())
        return reply
    finally:
        sys.stdout, sys.stderr = saved_out, saved_err
        reply["stderr_tail"] = capture.getvalue()[-STDERR_TAIL_CHARS:]


def serve(cpu_seconds: int, mem_bytes: int, workdir: str | None,
          allow_network: bool = False):
    """Request loop: runs until stdin closes."""
    # Claim the protocol channel before any candidate runs: replies go to the
    # original stdout, while fd 1 is pointed at stderr so stray prints from
    # candidate C extensions cannot corrupt the protocol.
    proto = os.fdopen(os.dup(1), "w", buffering=1)
    os.dup2(2, 1)
    sys.stdout = sys.stderr

    apply_limits(cpu_seconds, mem_bytes, workdir, allow_network)

    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("not an object")
        except ValueError:
            reply = {"id": "", "ok": False, "results": [], "error": "bad-request",
                     "stderr_tail": ""}
        else:
            reply = handle_request(request)
        proto.write(json.dumps(reply) + "\n")
        proto.flush()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cpu-seconds", type=int, default=0,
                        help="cumulative CPU cap; 0 disables")
    parser.add_argument("--mem-bytes", type=int, default=0,
                        help="address-space cap; 0 disables")
    parser.add_argument("--workdir", default=None,
                        help="ephemeral working directory to chdir into")
    parser.add_argument("--allow-network", action="store_true",
                        help="do not install the network import blocker")
    args = parser.parse_args(argv)
    serve(args.cpu_seconds, args.mem_bytes, args.workdir, args.allow_network)


if __name__ == "__main__":
    main()
