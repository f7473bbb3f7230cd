"""HTTP service wrapping the engine, benchmarks and verifiers.

Evolution runs are long-lived, so POST /runs supports both a blocking mode
(wait=true, for fixtures and small budgets) and a background mode polled via
GET /runs/{id}.  Everything the CLI does goes through these endpoints.
"""

from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI, HTTPException

from . import __version__
from .bench import (
    ConfigError,
    cmd_bench,
    cmd_generalize,
    cmd_longrun,
    cmd_oracle,
    cmd_run,
    cmd_verify,
    load_config,
)
from .kernels import KernelError
from .safety import SafetyPolicy, screen
from .schemas import (
    BenchRequest,
    GeneralizeRequest,
    GeneralizeResponse,
    Health,
    LongrunRequest,
    OracleResponse,
    PromptRequest,
    PromptResponse,
    RunHandle,
    RunRequest,
    RunStatus,
    SpecInfo,
    VerifyRequest,
    VerifyResponse,
)
from .specfile import (
    BUILTIN_SPECS,
    SpecFormatError,
    build_prompt,
    load_builtin_spec,
    parse_spec,
)

app = FastAPI(title="evosearch", version=__version__)

_runs: dict[str, dict] = {}
_runs_lock = threading.Lock()


def _bad_request(exc: Exception):
    raise HTTPException(status_code=400, detail=str(exc))


@app.get("/healthz", response_model=Health)
def healthz():
    with _runs_lock:
        counts: dict[str, int] = {}
        for entry in _runs.values():
            counts[entry["status"]] = counts.get(entry["status"], 0) + 1
    return Health(status="ok", version=__version__, runs=counts)


@app.post("/runs", response_model=RunStatus)
def start_run(req: RunRequest):
    try:
        config = load_config(req.config)
    except (ConfigError, ValueError) as exc:
        _bad_request(exc)

    run_id = uuid.uuid4().hex[:12]
    stop = threading.Event()
    entry = {"status": "running", "report": None, "error": None, "stop": stop}
    with _runs_lock:
        _runs[run_id] = entry

    def execute():
        try:
            entry["report"] = cmd_run(config, stop_event=stop)
            entry["status"] = "stopped" if stop.is_set() else "done"
        except Exception as exc:
            entry["error"] = str(exc)
            entry["status"] = "failed"

    if req.wait:
        execute()
        if entry["status"] == "failed":
            raise HTTPException(status_code=422, detail=entry["error"])
        return RunStatus(run_id=run_id, status=entry["status"], report=entry["report"])

    thread = threading.Thread(target=execute, daemon=True)
    entry["thread"] = thread
    thread.start()
    return RunStatus(run_id=run_id, status="running")


@app.get("/runs/{run_id}", response_model=RunStatus)
def run_status(run_id: str):
    with _runs_lock:
        entry = _runs.get(run_id)
    if entry is None:
        raise HTTPException(status_code=404, detail=f"no run {run_id}")
    return RunStatus(run_id=run_id, status=entry["status"],
                     report=entry["report"], error=entry["error"])


@app.delete("/runs/{run_id}", response_model=RunHandle)
def stop_run(run_id: str):
    with _runs_lock:
        entry = _runs.get(run_id)
    if entry is None:
        raise HTTPException(status_code=404, detail=f"no run {run_id}")
    entry["stop"].set()
    return RunHandle(run_id=run_id, status=entry["status"])


@app.post("/bench")
def bench(req: BenchRequest):
    try:
        config = load_config(req.config)
        return cmd_bench(config, runs=req.runs, parallel_runs=req.parallel_runs)
    except (ConfigError, ValueError) as exc:
        _bad_request(exc)


@app.post("/longrun")
def longrun(req: LongrunRequest):
    try:
        config = load_config(req.config)
        return cmd_longrun(config, checkpoint_every=req.checkpoint_every)
    except (ConfigError, ValueError) as exc:
        _bad_request(exc)


@app.post("/generalize", response_model=GeneralizeResponse)
def generalize(req: GeneralizeRequest):
    try:
        return cmd_generalize(
            variant=req.variant, n_values=req.n_values, baseline=req.baseline,
            seed=req.seed, value=req.value, priority_source=req.priority_source,
            group=req.group, budget=req.budget, worker_cmd=req.worker_cmd,
            eval_timeout_s=req.eval_timeout_s)
    except (ConfigError, KernelError, ValueError) as exc:
        _bad_request(exc)


@app.post("/verify", response_model=VerifyResponse)
def verify_construction(req: VerifyRequest):
    try:
        return cmd_verify(req.construction)
    except (KernelError, ValueError, TypeError) as exc:
        _bad_request(exc)


@app.get("/oracle/{problem}/{n}", response_model=OracleResponse)
def oracle(problem: str, n: int, geometry: str = "planar"):
    try:
        return cmd_oracle(problem, n, geometry=geometry)
    except KernelError as exc:
        _bad_request(exc)


@app.post("/prompt", response_model=PromptResponse)
def prompt_preview(req: PromptRequest):
    try:
        if req.spec_text:
            spec = parse_spec(req.spec_text)
        elif req.problem:
            spec = parse_spec(load_builtin_spec(req.problem))
        else:
            raise SpecFormatError("need spec_text or a builtin problem name")
        programs = [(p["source"], float(p["score"])) for p in req.programs]
        bundle = build_prompt(spec, programs)
        return PromptResponse(system_prompt=bundle.system_prompt,
                              user_prompt=bundle.user_prompt,
                              expected_next_version=bundle.expected_next_version)
    except (SpecFormatError, KeyError, ValueError) as exc:
        _bad_request(exc)


@app.get("/specs")
def list_specs():
    return {"specs": list(BUILTIN_SPECS)}


@app.get("/specs/{name}", response_model=SpecInfo)
def get_spec(name: str):
    try:
        return SpecInfo(name=name, text=load_builtin_spec(name))
    except SpecFormatError as exc:
        _bad_request(exc)


@app.post("/screen")
def screen_code(payload: dict):
    code = payload.get("code", "")
    policy = payload.get("policy")
    pol = SafetyPolicy.from_json(policy) if isinstance(policy, str) else SafetyPolicy()
    violation = screen(code, pol)
    if violation is None:
        return {"ok": True}
    return {"ok": False, "rule": violation.rule, "token": violation.token,
            "line": violation.line}
