"""Parallel candidate evaluation with independent result verification.

Backends are pluggable: the sandbox backend speaks newline-delimited JSON to
isolated worker processes, the fake backend serves canned results keyed by
the hash of the evolved function (for deterministic engine tests).  Scores of
built-in problems are never trusted: returned constructions are re-verified
and re-scored natively.
"""

from __future__ import annotations

import hashlib
import json
import math
import shutil
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass, field

from .kernels import check_construction
from .specfile import CandidateCode

TIMEOUT = "timeout"
CRASH = "crash"
INVALID_SCORE = "invalid-score"


@dataclass
class EvalRequest:
    request_id: str
    candidate: CandidateCode
    entry: str
    inputs: list
    timeout_s: float = 30.0
    mem_bytes: int = 1 << 30
    verify_problem: str | None = None   # built-in problem kind, or None to skip

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("inputs must be non-empty")
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class InputOutcome:
    score: float
    construction: dict | None = None


@dataclass
class EvalResult:
    request_id: str
    ok: bool
    per_input: list[InputOutcome] = field(default_factory=list)
    failure: str | None = None          # timeout | crash | invalid-score
    error: str | None = None
    stderr_tail: str = ""
    duration: float = 0.0
    verified: bool = False

    @property
    def scores(self) -> list[float]:
        return [o.score for o in self.per_input]

    @property
    def aggregate(self) -> float:
        return sum(o.score for o in self.per_input)


def code_key(priority_source: str) -> str:
    return hashlib.sha256(priority_source.encode("utf-8")).hexdigest()


class FakeBackend:
    """Canned results by evolved-function hash; unknown code crashes by default."""

    kind = "fake"

    def __init__(self):
        self._table: dict[str, dict] = {}
        self.calls = 0

    def add(self, priority_source: str, scores: list[float] | None = None,
            constructions: list[dict] | None = None, verified: bool = True,
            failure: str | None = None, busy_s: float = 0.0):
        self._table[code_key(priority_source)] = {
            "scores": scores or [], "constructions": constructions,
            "verified": verified, "failure": failure, "busy_s": busy_s,
        }
        return self

    def run(self, request: EvalRequest) -> EvalResult:
        self.calls += 1
        entry = self._table.get(code_key(request.candidate.priority_source))
        if entry is None:
            return EvalResult(request_id=request.request_id, ok=False, failure=CRASH,
                              error="no canned result for this code")
        if entry["busy_s"]:
            time.sleep(entry["busy_s"])
        if entry["failure"]:
            return EvalResult(request_id=request.request_id, ok=False,
                              failure=entry["failure"], error=entry["failure"])
        cons = entry["constructions"] or [None] * len(entry["scores"])
        outcomes = [InputOutcome(score=s, construction=c)
                    for s, c in zip(entry["scores"], cons)]
        return EvalResult(request_id=request.request_id, ok=True, per_input=outcomes,
                          verified=entry["verified"])


class SandboxBackend:
    """Runs candidates in worker subprocesses over the NDJSON wire protocol.

    Workers are recycled after each candidate by default; `warm=True` keeps a
    pool of live workers for speed at the cost of shared interpreter state.
    """

    kind = "sandbox"

    def __init__(self, worker_cmd: list[str] | None = None, warm: bool = False,
                 grace_s: float = 5.0, cpu_slack_s: int = 5):
        self.worker_cmd = list(worker_cmd) if worker_cmd else [
            sys.executable, "-m", "sandbox_worker"]
        self.warm = warm
        self.grace_s = grace_s
        self.cpu_slack_s = cpu_slack_s
        self._idle: list[_Worker] = []
        self._lock = threading.Lock()

    def _spawn(self, request: EvalRequest) -> "_Worker":
        if self.warm:
            cpu = 3600
        else:
            cpu = int(math.ceil(request.timeout_s * len(request.inputs))) + self.cpu_slack_s
        return _Worker(self.worker_cmd, cpu_seconds=cpu, mem_bytes=request.mem_bytes)

    def run(self, request: EvalRequest) -> EvalResult:
        worker = None
        if self.warm:
            with self._lock:
                if self._idle:
                    worker = self._idle.pop()
        if worker is None or not worker.alive():
            worker = self._spawn(request)
        try:
            result = worker.call(request, deadline_s=request.timeout_s * len(request.inputs)
                                 + self.grace_s)
        except Exception as exc:
            worker.kill()
            return EvalResult(request_id=request.request_id, ok=False, failure=CRASH,
                              error=f"worker protocol failure: {exc!r}")
        if self.warm and result.failure is None and worker.alive():
            with self._lock:
                self._idle.append(worker)
        else:
            worker.kill()
        return result

    def close(self):
        with self._lock:
            for worker in self._idle:
                worker.kill()
            self._idle.clear()


class _Worker:
    def __init__(self, cmd: list[str], cpu_seconds: int, mem_bytes: int):
        self.workdir = tempfile.mkdtemp(prefix="evosearch-worker-")
        self.proc = subprocess.Popen(
            cmd + ["--cpu-seconds", str(cpu_seconds), "--mem-bytes", str(mem_bytes),
                   "--workdir", self.workdir],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
            text=True)
        self._stderr_tail: list[str] = []
        self._drain = threading.Thread(target=self._drain_stderr, daemon=True)
        self._drain.start()

    def _drain_stderr(self):
        try:
            for line in self.proc.stderr:
                self._stderr_tail.append(line)
                del self._stderr_tail[:-40]
        except ValueError:
            pass

    def alive(self) -> bool:
        return self.proc.poll() is None

    def call(self, request: EvalRequest, deadline_s: float) -> EvalResult:
        start = time.monotonic()
        wire = {
            "id": request.request_id,
            "program": request.candidate.source,
            "entry": request.entry,
            "inputs": request.inputs,
            "timeout_s": request.timeout_s,
        }
        timed_out = threading.Event()

        def on_deadline():
            timed_out.set()
            self.kill(keep_dir=True)

        timer = threading.Timer(deadline_s, on_deadline)
        timer.start()
        try:
            self.proc.stdin.write(json.dumps(wire) + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        except (BrokenPipeError, OSError):
            line = ""
        finally:
            timer.cancel()
        duration = time.monotonic() - start

        if timed_out.is_set():
            return EvalResult(request_id=request.request_id, ok=False, failure=TIMEOUT,
                              error=f"no response within {deadline_s:.1f}s",
                              stderr_tail="".join(self._stderr_tail), duration=duration)
        if not line:
            return EvalResult(request_id=request.request_id, ok=False, failure=CRASH,
                              error="worker exited without replying",
                              stderr_tail="".join(self._stderr_tail), duration=duration)
        reply = json.loads(line)
        return self._to_result(request, reply, duration)

    @staticmethod
    def _to_result(request: EvalRequest, reply: dict, duration: float) -> EvalResult:
        base = dict(request_id=request.request_id, duration=duration,
                    stderr_tail=reply.get("stderr_tail", ""))
        if not reply.get("ok"):
            error = reply.get("error") or "unknown error"
            failure = CRASH
            if error.startswith(TIMEOUT):
                failure = TIMEOUT
            elif error.startswith(INVALID_SCORE):
                failure = INVALID_SCORE
            return EvalResult(ok=False, failure=failure, error=error, **base)
        outcomes = []
        for item in reply.get("results", []):
            score = item.get("score")
            if not isinstance(score, (int, float)) or isinstance(score, bool) \
                    or not math.isfinite(score):
                return EvalResult(ok=False, failure=INVALID_SCORE,
                                  error=f"invalid-score: {score!r}", **base)
            outcomes.append(InputOutcome(score=float(score),
                                         construction=item.get("construction")))
        if len(outcomes) != len(request.inputs):
            return EvalResult(ok=False, failure=CRASH,
                              error="result count does not match inputs", **base)
        return EvalResult(ok=True, per_input=outcomes, **base)

    def kill(self, keep_dir: bool = False):
        try:
            self.proc.kill()
        except OSError:
            pass
        try:
            self.proc.stdin.close()
        except (OSError, AttributeError):
            pass
        if not keep_dir:
            shutil.rmtree(self.workdir, ignore_errors=True)


def verify_result(result: EvalResult, request: EvalRequest) -> bool:
    """Native verification of a sandbox result.

    For built-in problems every input must hand back a construction of the
    right problem kind (and the right n, when the input is the plain grid or
    dimension parameter) whose recomputed score matches the reported one.
    """
    if not result.ok:
        return False
    if request.verify_problem is None:
        return True
    for outcome, inp in zip(result.per_input, request.inputs):
        obj = outcome.construction
        if not isinstance(obj, dict):
            return False
        if obj.get("problem") != request.verify_problem:
            return False
        if isinstance(inp, int) and obj.get("n") != inp:
            return False
        if not check_construction(obj, outcome.score):
            return False
    return True


class EvalPool:
    """`evaluators` parallel slots in front of a backend, plus verification."""

    def __init__(self, backend, evaluators: int = 8):
        if evaluators < 1:
            raise ValueError("need at least one evaluator slot")
        self.backend = backend
        self.evaluators = evaluators
        self._slots = threading.BoundedSemaphore(evaluators)

    def submit(self, request: EvalRequest) -> EvalResult:
        """Blocking evaluate; thread-safe, at most `evaluators` concurrent runs."""
        with self._slots:
            result = self.backend.run(request)
        if result.ok and getattr(self.backend, "kind", "") != "fake":
            result.verified = verify_result(result, request)
        elif not result.ok:
            result.verified = False
        return result

    def close(self):
        close = getattr(self.backend, "close", None)
        if close:
            close()
