import json

import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from evosearch.engine import EngineConfig, ProgramDatabase
from evosearch.evalpool import EvalPool, FakeBackend
from evosearch.gateway import LLMGateway, ModelConfig, TokenLedger
from evosearch.specfile import assemble_candidate, parse_spec

TOY_SPEC = '''"""Maximizes a score.

On every iteration, improve the priority_v# function over the versions from
previous iterations. Make only small changes.
"""

import funsearch


@funsearch.run
def evaluate(n: int) -> float:
  return priority(n)


@funsearch.evolve
def priority(n: int) -> float:
  """Returns a score."""
  return 0.0
'''


def reply_text(value):
    return f"```python\ndef priority_v2(n: int) -> float:\n  return {value}\n```"


def reply_body(value):
    return f"def priority(n: int) -> float:\n  return {value}\n"


@pytest.fixture
def toy_spec():
    return parse_spec(TOY_SPEC)


def make_scripted_gateway(tmp_path, replies, n_in=300, n_out=200, name="scripted"):
    """Gateway with a single scripted model; each reply costs n_in + n_out
    relative tokens at unit prices."""
    path = tmp_path / f"{name}.jsonl"
    lines = []
    for r in replies:
        if isinstance(r, str):
            r = {"text": r, "n_I": n_in, "n_O": n_out}
        lines.append(json.dumps(r))
    path.write_text("\n".join(lines) + "\n")
    model = ModelConfig(name=name, endpoint=f"scripted:{path}")
    return LLMGateway([model], TokenLedger())


def make_fake_pool(spec, entries, evaluators=2):
    """Fake backend keyed by evolved-function body; `entries` maps body text
    (or value via reply_body) to canned score lists."""
    backend = FakeBackend()
    seed_code = assemble_candidate(spec, spec.evolve_source)
    backend.add(seed_code.priority_source, scores=[0.0])
    for body, scores in entries.items():
        backend.add(body, scores=scores)
    return EvalPool(backend, evaluators=evaluators)


def seeded_db(bests, config=None):
    """Database with len(bests) islands whose best scores are exactly `bests`."""
    config = config or EngineConfig(island_count=len(bests), budget=1.0)
    db = ProgramDatabase(config)
    spec = parse_spec(TOY_SPEC)
    seed_code = assemble_candidate(spec, spec.evolve_source)
    db.seed(seed_code, [min(bests) - 1.0])
    for island_id, best in enumerate(bests):
        code = assemble_candidate(spec, reply_body(best))
        db.register(code, [best], island_id, origin="test", parents=[])
    return db, spec
