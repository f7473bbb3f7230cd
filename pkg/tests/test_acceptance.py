"""Acceptance criteria, one test per criterion, each printing a pass/fail line.

Run with plain pytest; the ACCEPTANCE lines bypass capture so they are always
visible.  The last two criteria need the sandbox worker package installed and
are skipped (loudly) when it is not.
"""

import random
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

from evosearch.engine import (
    EngineConfig,
    RunLedger,
    load_ledger,
    replay_membership,
    run_loop,
)
from evosearch.gateway import ModelConfig, TokenLedger
from evosearch.kernels import (
    AdmissibleTuple,
    AffineOracle,
    CapSetInstance,
    GridSubset,
    RandomOracle,
    SymmetryGroup,
    all_vectors,
    capset_greedy_solve,
    grid_points,
    max_capset_bruteforce,
    max_noiso_bruteforce,
    noiso_greedy_solve,
    noiso_nextpoint_solve,
    noiso_removal_solve,
    noiso_symmetric_solve,
    oracle_chooser,
    sieve_solve,
    verify_admissible,
    verify_capset,
    verify_noiso,
)
from evosearch.safety import DEFAULT_FORBID_TOKENS, screen
from evosearch.specfile import build_prompt, load_builtin_spec, parse_spec

from conftest import make_fake_pool, make_scripted_gateway, reply_body, reply_text, seeded_db
from naive import naive_admissible_ok, naive_capset_ok, naive_noiso_ok

GOLDEN = Path(__file__).parent / "golden"


def _emit(line):
    import conftest
    conftest.ACCEPTANCE_LINES.append(line)
    print(line, file=sys.__stderr__)


@contextmanager
def criterion(name, limit_s):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        _emit(f"ACCEPTANCE FAIL [{name}]")
        raise
    elapsed = time.perf_counter() - start
    ok = elapsed < limit_s
    _emit(f"ACCEPTANCE {'PASS' if ok else 'FAIL'} [{name}] "
          f"{elapsed:.2f}s (limit {limit_s:g}s)")
    assert ok, f"{name}: took {elapsed:.2f}s, limit {limit_s}s"


def test_admissible_classifications():
    with criterion("admissible-tuple classifications", 1.0):
        for entries in [(0, 2), (0, 2, 6), (0, 4, 6)]:
            assert verify_admissible(AdmissibleTuple(entries)), entries
        for entries in [(0, 1), (0, 2, 4)]:
            assert not verify_admissible(AdmissibleTuple(entries)), entries


def test_sieve_constant_seed_two_tuple():
    with criterion("constant-priority sieve yields a 2-tuple for n in [4,200]", 5.0):
        for n in range(4, 201):
            out = sieve_solve(n, lambda p, n: 1)
            assert out.entries == (0, 2), n


def test_oracle_equivalence():
    with criterion("greedy vs brute-force oracle equivalence", 60.0):
        for n in (1, 2):
            cap = max_capset_bruteforce(n)
            sizes = set()
            for seed in range(1000):
                out = capset_greedy_solve(n, RandomOracle(seed))
                assert out.size <= cap
                sizes.add(out.size)
            assert cap in sizes, f"no seed reached the cap-set max at n={n}"
        for n in (1, 2, 3, 4):
            cap = max_noiso_bruteforce(n)
            seeds = range(1000) if n <= 3 else range(200)
            sizes = set()
            for seed in seeds:
                out = noiso_greedy_solve(n, RandomOracle(seed))
                assert out.size <= cap
                sizes.add(out.size)
            if n <= 3:
                assert cap in sizes, f"no seed reached the no-isosceles max at n={n}"


def test_verifier_soundness_fuzz():
    with criterion("verifier fuzz vs naive triple enumeration (10^4 each)", 60.0):
        rng = random.Random(2024)

        vectors = all_vectors(2)
        for _ in range(10_000):
            pts = rng.sample(vectors, k=rng.randrange(0, 9))
            inst = CapSetInstance(n=2, points=pts)
            assert verify_capset(inst) == naive_capset_ok(pts)

        grid = grid_points(4)
        for i in range(10_000):
            geometry = "planar" if i % 2 else "torus"
            pts = rng.sample(grid, k=rng.randrange(0, 9))
            s = GridSubset(n=4, points=pts, geometry=geometry)
            assert verify_noiso(s) == naive_noiso_ok(pts, 4, geometry)

        for _ in range(10_000):
            k = rng.randrange(1, 12)
            entries = tuple(sorted(rng.sample(range(61), k)))
            t = AdmissibleTuple(entries)
            assert verify_admissible(t) == naive_admissible_ok(entries)


def test_solver_determinism_and_affine_invariance():
    with criterion("solver determinism + affine invariance (100 trials)", 30.0):
        group = SymmetryGroup("diags4")
        for trial in range(100):
            base = lambda: RandomOracle(trial)
            scaled = lambda: AffineOracle(RandomOracle(trial), 2.0, 7.0)

            runs = {
                "capset": lambda o: capset_greedy_solve(2, o()).points,
                "basic": lambda o: noiso_greedy_solve(6, o()).points,
                "torus": lambda o: noiso_greedy_solve(6, o(), "torus").points,
                "removal": lambda o: noiso_removal_solve(5, o()).points,
                "symmetric": lambda o: noiso_symmetric_solve(6, o(), group).points,
                "nextpoint": lambda o: noiso_nextpoint_solve(
                    6, oracle_chooser(o(), 6), budget=18).points,
            }
            for name, solve in runs.items():
                first = solve(base)
                again = solve(base)
                affine = solve(scaled)
                assert first == again, f"{name} not deterministic (trial {trial})"
                assert first == affine, f"{name} not affine-invariant (trial {trial})"


def test_engine_protocol_fixture(tmp_path, toy_spec):
    with criterion("engine protocol on scripted provider + fake backend", 30.0):
        # island reset empties exactly floor(K/2) lowest-best islands
        for k in (3, 4, 10):
            db, _ = seeded_db([float(i) for i in range(k)])
            report = db.reset(random.Random(0))
            assert sorted(report.emptied) == list(range(k // 2))

        # 10^4 relative-token budget fixture: monotone best, bounded overshoot,
        # replay reproduces membership
        values = [2, 9, 4, 9, 1, 6, 8, 3, 7, 5, 9, 2]
        replies = [reply_text(v) for v in values]
        entries = {reply_body(v): [float(v)] for v in values}
        gateway = make_scripted_gateway(tmp_path, replies)          # 500 n_R per call
        pool = make_fake_pool(toy_spec, entries)
        ledger_path = tmp_path / "acceptance-run.jsonl"
        config = EngineConfig(island_count=10, samplers=1, budget=10_000,
                              reset_interval=2600, seed=7)
        run_ledger = RunLedger(str(ledger_path), token_ledger=gateway.ledger)
        report = run_loop(config, toy_spec, gateway, pool, run_ledger, inputs=[1])

        assert report.halted_by == "budget"
        assert report.tokens["relative_total"] <= 10_000 + 500  # one in-flight call
        bests = [e["score"] for e in run_ledger.events if e["event"] == "best_update"]
        assert bests == sorted(bests)
        assert report.counts["resets"] >= 3
        events = load_ledger(ledger_path)
        assert replay_membership(events) == report.membership


def test_relative_token_accounting():
    with criterion("relative-token accounting matches the closed form", 5.0):
        for ratio in (1.0, 4.0):
            ledger = TokenLedger()
            model = ModelConfig(name="m", endpoint="scripted:unused",
                                price_in=1.0, price_out=ratio)
            rng = random.Random(99)
            pairs = [(rng.randrange(10_000), rng.randrange(10_000))
                     for _ in range(1000)]
            for n_in, n_out in pairs:
                ledger.record(model, n_in, n_out)
            closed_form = sum(ratio * a + b for a, b in pairs)
            assert abs(ledger.relative_total - closed_form) <= 1e-9 * closed_form


def test_safety_screen_criteria():
    with criterion("safety screen on the prime spec + forbidden injections", 5.0):
        spec_text = load_builtin_spec("prime_count")
        assert screen(spec_text) is None
        for token in DEFAULT_FORBID_TOKENS:
            injected = spec_text + f"\ndef helper(x):\n  return {token}(x)\n"
            assert screen(injected) is not None, token
        assert screen(spec_text + "\nNOTE = 'call eval(x) never'\n") is None


def test_prompt_golden_file():
    with criterion("prompt format golden test", 5.0):
        spec = parse_spec(load_builtin_spec("prime_count"))
        low = ('def priority(m: int) -> bool:\n'
               '  """Returns whether m should be treated as prime.\n'
               '  m is an int.\n'
               '  """\n'
               '  return True\n')
        high = ('def priority(m: int) -> bool:\n'
                '  """Returns whether m should be treated as prime.\n'
                '  m is an int.\n'
                '  """\n'
                '  if m < 2:\n'
                '    return False\n'
                '  return all(m % q for q in range(2, m))\n')
        bundle = build_prompt(spec, [(low, 8.0), (high, 25.0)], ids=[0, 1])
        golden = (GOLDEN / "prompt_two_programs.txt").read_text(encoding="utf-8")
        assert bundle.user_prompt == golden
        assert "def priority_v0" in bundle.user_prompt
        assert "def priority_v1" in bundle.user_prompt
        assert 'Improved version of `priority_v1`.' in bundle.user_prompt
        v0 = bundle.user_prompt.index("def priority_v0")
        v1 = bundle.user_prompt.index("def priority_v1")
        assert v0 < v1  # ascending score order


# --- secondary-component criteria (need the sandbox worker package) ---------


def worker_available() -> bool:
    probe = subprocess.run([sys.executable, "-c", "import sandbox_worker"],
                           capture_output=True)
    return probe.returncode == 0


needs_worker = pytest.mark.skipif(
    not worker_available(), reason="sandbox_worker package is not installed")


@needs_worker
def test_worker_runs_prime_spec():
    from evosearch.evalpool import EvalPool, EvalRequest, SandboxBackend
    from evosearch.specfile import assemble_candidate

    with criterion("worker executes the prime spec (scores 8 and 25)", 30.0):
        spec = parse_spec(load_builtin_spec("prime_count"))
        pool = EvalPool(SandboxBackend(), evaluators=2)
        try:
            seed_code = assemble_candidate(spec, spec.evolve_source)
            result = pool.submit(EvalRequest(
                request_id="seed", candidate=seed_code, entry="evaluate",
                inputs=[30], timeout_s=20))
            assert result.ok and result.scores == [8.0]

            classifier = (
                "def priority(m: int) -> bool:\n"
                "  if m < 2:\n"
                "    return False\n"
                "  return all(m % q for q in range(2, int(m ** 0.5) + 1))\n")
            good = assemble_candidate(spec, classifier)
            result = pool.submit(EvalRequest(
                request_id="good", candidate=good, entry="evaluate",
                inputs=[30], timeout_s=20))
            assert result.ok and result.scores == [25.0]

            # candidate exceptions and timeouts leave the pool serving
            boom = assemble_candidate(spec, "def priority(m):\n  return 1 // 0\n")
            result = pool.submit(EvalRequest(
                request_id="boom", candidate=boom, entry="evaluate",
                inputs=[30], timeout_s=20))
            assert not result.ok and "ZeroDivision" in (result.error or "")

            spin = assemble_candidate(
                spec, "def priority(m):\n  while True:\n    m += 1\n")
            result = pool.submit(EvalRequest(
                request_id="spin", candidate=spin, entry="evaluate",
                inputs=[30], timeout_s=2))
            assert not result.ok and result.failure == "timeout"

            again = pool.submit(EvalRequest(
                request_id="again", candidate=seed_code, entry="evaluate",
                inputs=[30], timeout_s=20))
            assert again.ok and again.scores == [8.0]
        finally:
            pool.close()


@needs_worker
def test_end_to_end_smoke(tmp_path):
    from evosearch.evalpool import EvalPool, SandboxBackend

    with criterion("end-to-end: engine + worker + scripted provider", 60.0):
        spec = parse_spec(load_builtin_spec("nat"))
        junk = "Thinking about it..."
        weak = ("```python\n"
                "def priority_v2(p: int, n: int) -> int:\n"
                "  return p - 1\n"
                "```")
        strong = ("```python\n"
                  "def priority_v2(p: int, n: int) -> int:\n"
                  "  if p < 5:\n"
                  "    return 1\n"
                  "  if p == 5:\n"
                  "    return 3\n"
                  "  return 4\n"
                  "```")
        gateway = make_scripted_gateway(
            tmp_path, [junk, weak, strong], n_in=400, n_out=100)
        pool = EvalPool(SandboxBackend(), evaluators=2)
        config = EngineConfig(island_count=2, samplers=1, budget=1500, seed=3,
                              eval_timeout_s=20)
        run_ledger = RunLedger(token_ledger=gateway.ledger)
        report = run_loop(config, spec, gateway, pool, run_ledger, inputs=[30],
                          verify_problem="nat")
        pool.close()

        seed_score = next(e for e in run_ledger.events if e["event"] == "seed")["aggregate"]
        assert seed_score == 2.0
        assert report.best_score > seed_score
        registered = [e for e in run_ledger.events if e["event"] == "register"]
        assert registered, "no evolved program survived verification"
