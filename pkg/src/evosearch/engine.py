"""Island-model program database and the evolution main loop.

The database is a single-writer state machine: every mutation happens under
one lock and is mirrored to an append-only JSONL run ledger, so island
membership can be reconstructed by replaying the ledger.
"""

from __future__ import annotations

import json
import math
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .evalpool import EvalPool, EvalRequest, code_key
from .gateway import LLMGateway
from .safety import SafetyPolicy, screen
from .specfile import (
    CandidateCode,
    ExtractionFailure,
    ProblemSpec,
    SpecFormatError,
    assemble_candidate,
    build_prompt,
    extract_function,
)

EVENTS = ("seed", "sample", "llm_response", "extraction_fail", "safety_reject",
          "eval", "register", "reset", "best_update", "halt")

WALL_CLOCK_FIELDS = ("t_wall", "latency", "duration", "wall_seconds")


class EngineError(RuntimeError):
    pass


@dataclass
class EngineConfig:
    island_count: int = 10
    prompt_programs: int = 2
    samplers: int = 10
    evaluators: int = 8
    reset_interval: float = 250_000.0
    reset_interval_kind: str = "tokens"      # tokens | minutes
    selection_temperature: float = 0.2
    budget: float = 2_000_000.0
    seed: int = 0
    eval_timeout_s: float = 30.0

    def __post_init__(self):
        if self.island_count < 2:
            raise ValueError("need at least 2 islands")
        if self.prompt_programs < 1:
            raise ValueError("need at least 1 prompt program")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.reset_interval_kind not in ("tokens", "minutes"):
            raise ValueError("reset interval kind must be tokens or minutes")
        if self.selection_temperature <= 0:
            raise ValueError("selection temperature must be > 0")


@dataclass
class CandidateProgram:
    id: int
    code: CandidateCode
    per_input_scores: list[float]
    island_id: int
    registered_at: int
    origin: str = "unknown"
    parent_ids: list[int] = field(default_factory=list)

    @property
    def aggregate_score(self) -> float:
        return sum(self.per_input_scores)


@dataclass
class Island:
    id: int
    members: list[int] = field(default_factory=list)
    best_score: float = -math.inf
    best_program_id: int | None = None
    last_improvement: int = 0
    code_hashes: set = field(default_factory=set)


@dataclass
class ResetReport:
    emptied: list[int]
    reseeded: list[dict]


class ProgramDatabase:
    def __init__(self, config: EngineConfig):
        self.config = config
        self.islands = [Island(id=i) for i in range(config.island_count)]
        self.programs: dict[int, CandidateProgram] = {}
        self.global_best_id: int | None = None
        self.clock = 0
        self.seeded = False
        self._next_id = 0
        self._lock = threading.RLock()

    # -- mutations ---------------------------------------------------------

    def _add(self, code: CandidateCode, scores: list[float], island: Island,
             origin: str, parents: list[int]) -> CandidateProgram:
        self.clock += 1
        program = CandidateProgram(
            id=self._next_id, code=code, per_input_scores=list(scores),
            island_id=island.id, registered_at=self.clock, origin=origin,
            parent_ids=list(parents))
        self._next_id += 1
        self.programs[program.id] = program
        island.members.append(program.id)
        island.code_hashes.add(code_key(code.priority_source))
        if program.aggregate_score > island.best_score:
            island.best_score = program.aggregate_score
            island.best_program_id = program.id
            island.last_improvement = self.clock
        improved = (self.global_best_id is None
                    or program.aggregate_score > self.programs[self.global_best_id].aggregate_score)
        if improved:
            self.global_best_id = program.id
        return program

    def seed(self, code: CandidateCode, scores: list[float]) -> list[CandidateProgram]:
        """Registers the spec's own evolve body on every island."""
        with self._lock:
            if self.seeded:
                raise EngineError("database is already seeded")
            self.seeded = True
            return [self._add(code, scores, island, "seed", []) for island in self.islands]

    def register(self, code: CandidateCode, scores: list[float], island_id: int,
                 origin: str, parents: list[int]) -> CandidateProgram | None:
        """Appends a scored program; exact-duplicate code within the island is
        dropped silently (returns None)."""
        if any(not math.isfinite(s) for s in scores):
            raise ValueError("non-finite score")
        with self._lock:
            island = self.islands[island_id]
            if code_key(code.priority_source) in island.code_hashes:
                return None
            return self._add(code, scores, island, origin, parents)

    def sample(self, rng: random.Random) -> tuple[int, list[CandidateProgram]]:
        """Uniform island choice, then score-weighted draws without replacement.

        Weights are a range-normalized softmax:
        exp((s - max) / (tau * max(1, max - min))).
        """
        with self._lock:
            if not self.seeded:
                raise EngineError("database is not seeded")
            island = self.islands[rng.randrange(len(self.islands))]
            members = [self.programs[pid] for pid in island.members]
            tau = self.config.selection_temperature
            top = max(p.aggregate_score for p in members)
            span = top - min(p.aggregate_score for p in members)
            scale = tau * max(1.0, span)
            weights = [math.exp((p.aggregate_score - top) / scale) for p in members]
            take = min(self.config.prompt_programs, len(members))
            chosen: list[CandidateProgram] = []
            pool = list(zip(members, weights))
            for _ in range(take):
                total = sum(w for _, w in pool)
                r = rng.random() * total
                acc = 0.0
                for i, (p, w) in enumerate(pool):
                    acc += w
                    if r < acc:
                        chosen.append(p)
                        del pool[i]
                        break
                else:
                    p, _ = pool.pop()
                    chosen.append(p)
            return island.id, chosen

    def reset(self, rng: random.Random) -> ResetReport:
        """Empties the floor(K/2) islands with the lowest best score and reseeds
        each with a copy of the best program of a surviving island.

        Tie order: older last_improvement is discarded first, then higher id.
        The island holding the global best program is never touched.
        """
        with self._lock:
            k = len(self.islands)
            exempt = (self.programs[self.global_best_id].island_id
                      if self.global_best_id is not None else -1)
            order = sorted(
                (isl for isl in self.islands if isl.id != exempt),
                key=lambda isl: (isl.best_score, isl.last_improvement, -isl.id))
            victims = order[:k // 2]
            survivors = [isl for isl in self.islands
                         if isl.id not in {v.id for v in victims}]
            reseeded = []
            for victim in victims:
                for pid in victim.members:
                    del self.programs[pid]
                victim.members.clear()
                victim.code_hashes.clear()
                victim.best_score = -math.inf
                victim.best_program_id = None
                source = survivors[rng.randrange(len(survivors))]
                donor = self.programs[source.best_program_id]
                copy = self._add(donor.code, donor.per_input_scores, victim,
                                 "reset-copy", [donor.id])
                reseeded.append({"island": victim.id, "source_island": source.id,
                                 "program_id": copy.id, "from_program": donor.id,
                                 "code_hash": code_key(donor.code.priority_source),
                                 "scores": list(donor.per_input_scores)})
            return ResetReport(emptied=[v.id for v in victims], reseeded=reseeded)

    # -- views -------------------------------------------------------------

    def best(self) -> CandidateProgram | None:
        with self._lock:
            return None if self.global_best_id is None else self.programs[self.global_best_id]

    def membership(self) -> dict[int, list[int]]:
        with self._lock:
            return {isl.id: list(isl.members) for isl in self.islands}

    def check_invariants(self):
        with self._lock:
            for isl in self.islands:
                if isl.members:
                    best = max(self.programs[p].aggregate_score for p in isl.members)
                    assert isl.best_score == best, f"island {isl.id} best out of sync"
                    assert self.programs[isl.best_program_id].aggregate_score == best


class RunLedger:
    """Append-only JSONL event stream; also kept in memory for replay checks."""

    def __init__(self, path=None, token_ledger=None):
        self.path = path
        self.token_ledger = token_ledger
        self.events: list[dict] = []
        self.counter = 0
        self._lock = threading.Lock()
        self._fh = open(path, "w", encoding="utf-8") if path else None

    def event(self, kind: str, **payload) -> dict:
        assert kind in EVENTS, kind
        with self._lock:
            self.counter += 1
            entry = {"event": kind, "counter": self.counter, "t_wall": time.time(),
                     "n_r": self.token_ledger.relative_total if self.token_ledger else 0.0}
            entry.update(payload)
            self.events.append(entry)
            if self._fh:
                self._fh.write(json.dumps(entry) + "\n")
                self._fh.flush()
            return entry

    def count(self, kind: str) -> int:
        with self._lock:
            return sum(1 for e in self.events if e["event"] == kind)

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None


def replay_membership(events) -> dict[int, list[int]]:
    """Rebuilds island membership from seed/register/reset ledger events."""
    membership: dict[int, list[int]] = {}
    for e in events:
        kind = e["event"]
        if kind == "seed":
            for island, pid in zip(e["islands"], e["program_ids"]):
                membership.setdefault(island, []).append(pid)
        elif kind == "register":
            membership.setdefault(e["island_id"], []).append(e["program_id"])
        elif kind == "reset":
            for island in e["emptied"]:
                membership[island] = []
            for item in e["reseeded"]:
                membership.setdefault(item["island"], []).append(item["program_id"])
    return membership


def load_ledger(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass
class RunReport:
    best_score: float
    best_program_id: int | None
    best_source: str
    best_per_input: list[float]
    halted_by: str
    counts: dict
    tokens: dict
    membership: dict
    wall_seconds: float

    def to_dict(self) -> dict:
        return {
            "best_score": self.best_score,
            "best_program_id": self.best_program_id,
            "best_source": self.best_source,
            "best_per_input": self.best_per_input,
            "halted_by": self.halted_by,
            "counts": self.counts,
            "tokens": self.tokens,
            "membership": {str(k): v for k, v in self.membership.items()},
            "wall_seconds": self.wall_seconds,
        }


class Engine:
    """Wires spec, gateway, pool, database and ledger into the evolution loop."""

    def __init__(self, config: EngineConfig, spec: ProblemSpec, gateway: LLMGateway,
                 pool: EvalPool, run_ledger: RunLedger, inputs: list,
                 verify_problem: str | None = None,
                 policy: SafetyPolicy | None = None,
                 stop_event: threading.Event | None = None,
                 checkpoint=None):
        self.config = config
        self.spec = spec
        self.gateway = gateway
        self.pool = pool
        self.ledger = run_ledger
        self.inputs = list(inputs)
        self.verify_problem = verify_problem
        self.policy = policy or SafetyPolicy()
        self.stop_event = stop_event or threading.Event()
        self.checkpoint = checkpoint
        self.db = ProgramDatabase(config)
        self.rng = random.Random(config.seed)
        self.counts = {"samples": 0, "extraction_failures": 0, "safety_rejections": 0,
                       "eval_failures": 0, "registered": 0, "duplicates": 0, "resets": 0}
        self._halt_reason: str | None = None
        self._request_seq = 0
        self._loop_lock = threading.RLock()
        self._start_wall = None
        self._next_token_reset = config.reset_interval
        self._last_wall_reset = None

    # -- helpers -----------------------------------------------------------

    def _request(self, code: CandidateCode) -> EvalRequest:
        with self._loop_lock:
            self._request_seq += 1
            rid = f"r{self._request_seq}"
        return EvalRequest(request_id=rid, candidate=code, entry=self.spec.run_entry,
                           inputs=self.inputs, timeout_s=self.config.eval_timeout_s,
                           verify_problem=self.verify_problem)

    def _seed(self):
        code = assemble_candidate(self.spec, self.spec.evolve_source, origin="seed")
        result = self.pool.submit(self._request(code))
        if not result.ok or not result.verified:
            raise EngineError(
                f"seed program failed evaluation: {result.failure or 'unverified'}"
                f" ({result.error})")
        programs = self.db.seed(code, result.scores)
        self.ledger.event("seed",
                          islands=[p.island_id for p in programs],
                          program_ids=[p.id for p in programs],
                          scores=result.scores,
                          aggregate=programs[0].aggregate_score,
                          code_hash=code_key(code.priority_source))
        best = self.db.best()
        self.ledger.event("best_update", program_id=best.id, score=best.aggregate_score)

    def _maybe_reset(self):
        with self._loop_lock:
            fire = False
            if self.config.reset_interval_kind == "tokens":
                total = self.gateway.ledger.relative_total
                if total >= self._next_token_reset:
                    fire = True
                    while self._next_token_reset <= total:
                        self._next_token_reset += self.config.reset_interval
            else:
                now = time.monotonic()
                if now - self._last_wall_reset >= self.config.reset_interval * 60:
                    fire = True
                    self._last_wall_reset = now
            if fire:
                report = self.db.reset(self.rng)
                self.counts["resets"] += 1
                self.ledger.event("reset", emptied=report.emptied, reseeded=report.reseeded)

    def _iteration(self) -> bool:
        """One sample->prompt->LLM->screen->evaluate->register pass.
        Returns False when the loop must halt."""
        if self.stop_event.is_set():
            self._halt_reason = "stop"
            return False
        if not self.gateway.ledger.below(self.config.budget):
            self._halt_reason = "budget"
            return False

        with self._loop_lock:
            island_id, sampled = self.db.sample(self.rng)
            self.counts["samples"] += 1
            self.ledger.event("sample", island_id=island_id,
                              program_ids=[p.id for p in sampled])
            ordered = sorted(sampled, key=lambda p: p.registered_at)
            bundle = build_prompt(
                self.spec,
                [(p.code.priority_source, p.aggregate_score) for p in ordered],
                ids=[p.id for p in ordered])
            model = self.gateway.pick_model(self.rng)

        issued = self.gateway.complete_within_budget(bundle, model, self.config.budget)
        if issued is None:
            self._halt_reason = "budget"
            return False
        completion, delta = issued
        self.ledger.event("llm_response", model=completion.model, n_in=completion.n_in,
                          n_out=completion.n_out, delta=delta, estimated=completion.estimated,
                          latency=completion.latency)

        try:
            priority_source = extract_function(completion.text, self.spec.evolve_name)
            code = assemble_candidate(self.spec, priority_source, origin=completion.model,
                                      parents=[p.id for p in sampled])
        except (ExtractionFailure, SpecFormatError) as exc:
            self.counts["extraction_failures"] += 1
            self.ledger.event("extraction_fail", reason=str(exc)[:200])
            self._maybe_reset()
            return True

        violation = screen(code.source, self.policy)
        if violation is not None:
            self.counts["safety_rejections"] += 1
            self.ledger.event("safety_reject", rule=violation.rule,
                              token=violation.token, line=violation.line)
            self._maybe_reset()
            return True

        result = self.pool.submit(self._request(code))
        self.ledger.event("eval", request_id=result.request_id, ok=result.ok,
                          failure=result.failure, verified=result.verified,
                          scores=result.scores, duration=result.duration)
        if not result.ok or not result.verified:
            self.counts["eval_failures"] += 1
            self._maybe_reset()
            return True

        with self._loop_lock:
            prev_best = self.db.best()
            try:
                program = self.db.register(code, result.scores, island_id,
                                           origin=completion.model,
                                           parents=[p.id for p in sampled])
            except ValueError:
                self.counts["eval_failures"] += 1
                self._maybe_reset()
                return True
            if program is None:
                self.counts["duplicates"] += 1
            else:
                self.counts["registered"] += 1
                self.ledger.event("register", program_id=program.id,
                                  island_id=program.island_id,
                                  scores=program.per_input_scores,
                                  aggregate=program.aggregate_score,
                                  origin=program.origin,
                                  parents=program.parent_ids,
                                  code_hash=code_key(code.priority_source))
                best = self.db.best()
                if prev_best is None or best.aggregate_score > prev_best.aggregate_score:
                    self.ledger.event("best_update", program_id=best.id,
                                      score=best.aggregate_score)
            self._maybe_reset()
            if self.checkpoint:
                self.checkpoint(self.gateway.ledger.relative_total,
                                self.db.best().aggregate_score)
        return True

    def run(self) -> RunReport:
        self._start_wall = time.monotonic()
        self._last_wall_reset = time.monotonic()
        self._seed()
        try:
            if self.config.samplers <= 1:
                while self._iteration():
                    pass
            else:
                with ThreadPoolExecutor(max_workers=self.config.samplers) as pool:
                    def sampler_loop():
                        while self._iteration():
                            pass
                    futures = [pool.submit(sampler_loop)
                               for _ in range(self.config.samplers)]
                    for f in futures:
                        f.result()
        except Exception as exc:
            self._halt_reason = f"abort: {exc}"
            raise
        finally:
            reason = self._halt_reason or "budget"
            self.ledger.event("halt", reason=reason, counts=dict(self.counts))
        return self._report(reason)

    def _report(self, reason: str) -> RunReport:
        best = self.db.best()
        return RunReport(
            best_score=best.aggregate_score if best else -math.inf,
            best_program_id=best.id if best else None,
            best_source=best.code.priority_source if best else "",
            best_per_input=list(best.per_input_scores) if best else [],
            halted_by=reason,
            counts=dict(self.counts),
            tokens=self.gateway.ledger.snapshot(),
            membership=self.db.membership(),
            wall_seconds=time.monotonic() - self._start_wall,
        )


def run_loop(config: EngineConfig, spec: ProblemSpec, gateway: LLMGateway,
             pool: EvalPool, run_ledger: RunLedger, inputs: list,
             verify_problem: str | None = None, policy: SafetyPolicy | None = None,
             stop_event: threading.Event | None = None, checkpoint=None) -> RunReport:
    engine = Engine(config, spec, gateway, pool, run_ledger, inputs,
                    verify_problem=verify_problem, policy=policy,
                    stop_event=stop_event, checkpoint=checkpoint)
    return engine.run()
