"""Benchmark protocol and command implementations behind the service and CLI.

A run configuration is a single JSON object; every field has a flag override
in the CLI.  Reports are plain dicts so the service, the CLI and tests share
one code path.
"""

from __future__ import annotations

import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .engine import EngineConfig, RunLedger, run_loop
from .evalpool import EvalPool, EvalRequest, FakeBackend, SandboxBackend
from .gateway import LLMGateway, ModelConfig, TokenLedger
from .kernels import (
    KernelError,
    SymmetryGroup,
    baseline_family,
    check_construction,
    from_json,
    max_capset_bruteforce,
    max_noiso_bruteforce,
    generalization_sweep,
    sweep_csv,
    verify,
)
from .kernels.sweep import SweepRow
from .safety import SafetyPolicy
from .specfile import assemble_candidate, load_builtin_spec, parse_spec

# problem kind -> (builtin spec, default single input, verification kind)
PROBLEMS = {
    "capset": ("capset", 8, "capset"),
    "nat": ("nat", 5000, "nat"),
    "noiso": ("noiso", 64, "noiso"),
    "noiso_torus": ("noiso_torus", 64, "noiso"),
    "noiso_removal": ("noiso_removal", 64, "noiso"),
    "noiso_symmetric": ("noiso_symmetric", 64, "noiso"),
    "noiso_nextpoint": ("noiso_nextpoint", 64, "noiso"),
    "noiso_smallmax": ("noiso_smallmax", 64, "noiso"),
    "prime_count": ("prime_count", 30, None),
    "custom": (None, None, None),
}

GENERALIZE_BASELINES = ("random", "l2-center", "constant")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "custom"
    spec_path: str | None = None
    spec_text: str | None = None
    inputs: list | None = None
    models: list[ModelConfig] = field(default_factory=list)
    engine: EngineConfig = field(default_factory=EngineConfig)
    token_formula: str = "paper"
    backend: str = "sandbox"             # sandbox | fake
    worker_cmd: list[str] | None = None
    warm_workers: bool = False
    policy_path: str | None = None
    ledger_path: str | None = None
    report_path: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.backend not in ("sandbox", "fake"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.engine.budget <= 0:
            raise ConfigError("budget must be > 0")
        if not self.models:
            raise ConfigError("at least one model must be configured")

    def resolve_spec_text(self) -> str:
        if self.spec_text is not None:
            return self.spec_text
        if self.spec_path is not None:
            path = Path(self.spec_path)
            if not path.exists():
                raise ConfigError(f"spec file not found: {path}")
            return path.read_text(encoding="utf-8")
        builtin = PROBLEMS[self.problem][0]
        if builtin is None:
            raise ConfigError("custom problem needs a spec file")
        return load_builtin_spec(builtin)

    def resolved_inputs(self) -> list:
        if self.inputs:
            return list(self.inputs)
        default = PROBLEMS[self.problem][1]
        if default is None:
            raise ConfigError("custom problem needs explicit inputs")
        return [default]

    def verify_problem(self) -> str | None:
        return PROBLEMS[self.problem][2]


def _parse_reset_interval(value) -> tuple[float, str]:
    if isinstance(value, dict):
        if "tokens" in value:
            return float(value["tokens"]), "tokens"
        if "minutes" in value:
            return float(value["minutes"]), "minutes"
        raise ConfigError(f"bad reset interval {value!r}")
    if isinstance(value, str):
        kind, _, num = value.partition(":")
        if kind in ("tokens", "minutes") and num:
            return float(num), kind
        raise ConfigError(f"bad reset interval {value!r} (use tokens:N or minutes:N)")
    return float(value), "tokens"


def load_config(data: dict, **overrides) -> RunConfig:
    """Builds a RunConfig from a config dict; keyword overrides win."""
    merged = dict(data)
    merged.update({k: v for k, v in overrides.items() if v is not None})

    models = []
    for m in merged.get("models", []):
        models.append(ModelConfig(
            name=m["name"], endpoint=m["endpoint"],
            api_key_env=m.get("api_key_env", ""),
            price_in=float(m.get("price_in", 1.0)),
            price_out=float(m.get("price_out", 1.0)),
            temperature=float(m.get("temperature", 1.0)),
            max_tokens=int(m.get("max_tokens", 2048)),
            weight=float(m.get("weight", 1.0))))
    if merged.get("model_names"):
        wanted = set(merged["model_names"])
        models = [m for m in models if m.name in wanted]

    reset_value, reset_kind = _parse_reset_interval(merged.get("reset_interval", 250_000))
    engine = EngineConfig(
        island_count=int(merged.get("islands", 10)),
        prompt_programs=int(merged.get("prompt_programs", 2)),
        samplers=int(merged.get("samplers", 10)),
        evaluators=int(merged.get("evaluators", 8)),
        reset_interval=reset_value,
        reset_interval_kind=reset_kind,
        selection_temperature=float(merged.get("selection_temperature", 0.2)),
        budget=float(merged.get("budget", 2e6)),
        seed=int(merged.get("seed", 0)),
        eval_timeout_s=float(merged.get("eval_timeout_s", 30.0)),
    )
    return RunConfig(
        problem=merged.get("problem", "custom"),
        spec_path=merged.get("spec"),
        spec_text=merged.get("spec_text"),
        inputs=merged.get("inputs"),
        models=models,
        engine=engine,
        token_formula=merged.get("token_formula", "paper"),
        backend=merged.get("backend", "sandbox"),
        worker_cmd=merged.get("worker_cmd"),
        warm_workers=bool(merged.get("warm_workers", False)),
        policy_path=merged.get("policy"),
        ledger_path=merged.get("ledger"),
        report_path=merged.get("report"),
    )


def load_config_file(path, **overrides) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config(json.load(fh), **overrides)


def _build_pool(config: RunConfig, fake_backend: FakeBackend | None = None) -> EvalPool:
    if config.backend == "fake":
        if fake_backend is None:
            raise ConfigError("fake backend requires a canned result table")
        backend = fake_backend
    else:
        backend = SandboxBackend(worker_cmd=config.worker_cmd, warm=config.warm_workers)
    return EvalPool(backend, evaluators=config.engine.evaluators)


def _policy(config: RunConfig) -> SafetyPolicy:
    if config.policy_path:
        path = Path(config.policy_path)
        if not path.exists():
            raise ConfigError(f"policy file not found: {path}")
        return SafetyPolicy.from_json(path.read_text(encoding="utf-8"))
    return SafetyPolicy()


def cmd_run(config: RunConfig, fake_backend: FakeBackend | None = None,
            stop_event: threading.Event | None = None,
            seed_offset: int = 0, checkpoint=None,
            ledger_path: str | None = None) -> dict:
    """One full evolution run; returns the report dict."""
    spec = parse_spec(config.resolve_spec_text())
    engine_config = EngineConfig(**{**config.engine.__dict__,
                                    "seed": config.engine.seed + seed_offset})
    gateway = LLMGateway(config.models, TokenLedger(config.token_formula))
    pool = _build_pool(config, fake_backend)
    path = ledger_path if ledger_path is not None else config.ledger_path
    run_ledger = RunLedger(path, token_ledger=gateway.ledger)
    try:
        report = run_loop(engine_config, spec, gateway, pool, run_ledger,
                          inputs=config.resolved_inputs(),
                          verify_problem=config.verify_problem(),
                          policy=_policy(config), stop_event=stop_event,
                          checkpoint=checkpoint)
    finally:
        run_ledger.close()
        pool.close()
        gateway.close()
    out = report.to_dict()
    out["seed"] = engine_config.seed
    out["problem"] = config.problem
    if config.report_path:
        Path(config.report_path).write_text(json.dumps(out, indent=2) + "\n",
                                            encoding="utf-8")
    return out


def aggregate_bench(bests: list[float]) -> dict:
    """The per-model row of the benchmark table: ave/min/max of the per-run
    bests plus how many runs attained the max."""
    top = max(bests)
    return {
        "ave_best": sum(bests) / len(bests),
        "min_best": min(bests),
        "max_best": top,
        "count_at_max": sum(1 for b in bests if b == top),
    }


def cmd_bench(config: RunConfig, runs: int = 8,
              fake_backend: FakeBackend | None = None,
              parallel_runs: int = 1) -> dict:
    """R independent runs per model with seeds seed+0..R-1, aggregated.

    Runs execute sequentially unless parallel_runs > 1 (bounded by the CPU
    count); each run gets its own gateway, pool and ledger either way.
    """
    if runs < 1:
        raise ConfigError("need at least one run")
    workers = max(1, min(parallel_runs, os.cpu_count() or 1))
    rows = []
    for model in config.models:
        per_model = RunConfig(**{**config.__dict__, "models": [model]})

        def one_run(i):
            ledger_path = None
            if config.ledger_path:
                ledger_path = f"{config.ledger_path}.{model.name}.{i}"
            report = cmd_run(per_model, fake_backend=fake_backend, seed_offset=i,
                             ledger_path=ledger_path)
            cost = sum(row["cost"] for row in report["tokens"]["per_model"].values())
            return report["best_score"], cost

        bests, costs, partial = [], [], False
        if workers == 1:
            outcomes = []
            for i in range(runs):
                try:
                    outcomes.append(one_run(i))
                except Exception:
                    outcomes.append(None)
        else:
            with ThreadPoolExecutor(max_workers=workers) as tp:
                futures = [tp.submit(one_run, i) for i in range(runs)]
                outcomes = []
                for f in futures:
                    try:
                        outcomes.append(f.result())
                    except Exception:
                        outcomes.append(None)
        for outcome in outcomes:
            if outcome is None:
                partial = True
                continue
            best, cost = outcome
            bests.append(best)
            costs.append(cost)
        if bests:
            row = aggregate_bench(bests)
            row["cost_per_run"] = sum(costs) / len(costs)
        else:
            row = {"ave_best": None, "min_best": None, "max_best": None,
                   "count_at_max": 0, "cost_per_run": None}
            partial = True
        row["model"] = model.name
        row["partial"] = partial
        row["bests"] = bests
        rows.append(row)
    out = {"runs": runs, "budget": config.engine.budget, "rows": rows,
           "cost_note": "cost_per_run is an estimate from configured prices"}
    if config.report_path:
        Path(config.report_path).write_text(json.dumps(out, indent=2) + "\n",
                                            encoding="utf-8")
    return out


def cmd_longrun(config: RunConfig, checkpoint_every: float = 1e4,
                fake_backend: FakeBackend | None = None) -> dict:
    """Single run with periodic best-score checkpoints: rows of (n_R, best)."""
    trace: list[tuple[float, float]] = []
    state = {"next": 0.0}

    def checkpoint(n_r, best):
        if n_r >= state["next"]:
            trace.append((n_r, best))
            while state["next"] <= n_r:
                state["next"] += checkpoint_every

    report = cmd_run(config, fake_backend=fake_backend, checkpoint=checkpoint)
    report["trace"] = [{"n_R": nr, "best": best} for nr, best in trace]
    report["trace_csv"] = "n_R,best\n" + "".join(
        f"{nr:.6g},{best:.6g}\n" for nr, best in trace)
    if config.report_path:
        Path(config.report_path).write_text(json.dumps(report, indent=2) + "\n",
                                            encoding="utf-8")
    return report


def parity_warning(n_values) -> str | None:
    parities = {n % 2 for n in n_values}
    if len(n_values) > 1 and len(parities) == 1:
        return ("all requested grid sizes share the same parity; "
                "generalization results may be parity artifacts")
    return None


def cmd_generalize(variant: str, n_values: list[int],
                   baseline: str | None = None, seed: int = 0, value: float = 0.0,
                   priority_path: str | None = None, priority_source: str | None = None,
                   group: str = "diags4", budget: int | None = None,
                   worker_cmd: list[str] | None = None,
                   eval_timeout_s: float = 120.0) -> dict:
    """Generalization sweep for a baseline priority (native) or evolved code
    (executed in the sandbox, construction re-verified natively)."""
    if not n_values:
        raise ConfigError("n_values must be non-empty")
    sym = SymmetryGroup(group)
    if baseline is not None:
        if baseline not in GENERALIZE_BASELINES:
            raise ConfigError(f"unknown baseline {baseline!r}")
        family = baseline_family(baseline, seed=seed, value=value)
        rows = generalization_sweep(family, variant, n_values, group=sym, budget=budget)
    elif priority_path is not None or priority_source is not None:
        source = priority_source
        if source is None:
            source = Path(priority_path).read_text(encoding="utf-8")
        rows = _generalize_evolved(source, variant, n_values, worker_cmd,
                                   eval_timeout_s)
    else:
        raise ConfigError("need a baseline kind or an evolved priority")
    out = {
        "variant": variant,
        "rows": [{"n": r.n, "size": r.size, "ok": r.ok} for r in rows],
        "csv": sweep_csv(rows, variant=variant),
        "ok_count": sum(1 for r in rows if r.ok),
    }
    warning = parity_warning(n_values)
    if warning:
        out["warning"] = warning
    return out


_VARIANT_SPECS = {
    "basic": "noiso", "torus": "noiso_torus", "removal": "noiso_removal",
    "symmetric": "noiso_symmetric", "nextpoint": "noiso_nextpoint",
    "smallmax": "noiso_smallmax",
}


def _generalize_evolved(source: str, variant: str, n_values: list[int],
                        worker_cmd: list[str] | None, eval_timeout_s: float):
    if variant not in _VARIANT_SPECS:
        raise ConfigError(f"unknown variant {variant!r}")
    spec = parse_spec(load_builtin_spec(_VARIANT_SPECS[variant]))
    code = assemble_candidate(spec, source, origin="generalize")
    backend = SandboxBackend(worker_cmd=worker_cmd)
    try:
        request = EvalRequest(request_id="generalize", candidate=code,
                              entry=spec.run_entry, inputs=list(n_values),
                              timeout_s=eval_timeout_s, verify_problem="noiso")
        result = backend.run(request)
    finally:
        backend.close()
    rows = []
    if not result.ok:
        return [SweepRow(n=int(n), size=None, ok=False) for n in n_values]
    for n, outcome in zip(n_values, result.per_input):
        obj = outcome.construction
        good = (isinstance(obj, dict) and obj.get("problem") == "noiso"
                and obj.get("n") == n and check_construction(obj, outcome.score))
        size = len(obj["elements"]) if isinstance(obj, dict) and "elements" in obj else None
        rows.append(SweepRow(n=int(n), size=size if good else None, ok=good))
    return rows


def cmd_verify(construction: dict) -> dict:
    """Native verification of a construction file; returns verdict and stats."""
    inst = from_json(construction)
    valid = verify(inst)
    out = {"problem": construction.get("problem"), "valid": valid}
    if construction.get("problem") == "nat":
        out["size"] = inst.k
        out["diameter"] = inst.diameter
    else:
        out["size"] = inst.size
    return out


def cmd_oracle(problem: str, n: int, geometry: str = "planar") -> dict:
    if problem == "capset":
        return {"problem": problem, "n": n, "max": max_capset_bruteforce(n)}
    if problem == "noiso":
        return {"problem": problem, "n": n, "geometry": geometry,
                "max": max_noiso_bruteforce(n, geometry)}
    raise KernelError(f"no brute-force oracle for problem {problem!r}")
