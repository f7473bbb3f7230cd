import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evosearch.kernels import (
    AdmissibleTuple,
    KernelError,
    primes_upto,
    sieve_solve,
    verify_admissible,
)

from naive import naive_admissible_ok, sympy_free_primes


def test_primes_upto():
    assert primes_upto(1) == ()
    assert primes_upto(30) == tuple(sympy_free_primes(30))


def test_classifications():
    admissible = [(0, 2), (0, 2, 6), (0, 4, 6)]
    not_admissible = [(0, 1), (0, 2, 4)]
    for t in admissible:
        assert verify_admissible(AdmissibleTuple(t)), t
    for t in not_admissible:
        assert not verify_admissible(AdmissibleTuple(t)), t


def test_tuple_invariants():
    t = AdmissibleTuple((5, 7, 11))
    assert t.k == 3
    assert t.diameter == 6
    assert t.normalized().entries == (0, 2, 6)
    with pytest.raises(KernelError):
        AdmissibleTuple((3, 3))
    with pytest.raises(KernelError):
        AdmissibleTuple((-1, 0))


@settings(max_examples=500, deadline=None)
@given(st.lists(st.integers(0, 60), min_size=1, max_size=12, unique=True))
def test_verify_matches_naive_over_all_primes(entries):
    t = AdmissibleTuple(tuple(sorted(entries)))
    assert verify_admissible(t) == naive_admissible_ok(t.entries)


def _simulate_sieve(n, residue):
    # Straight-line re-simulation, independent of the library sieve.
    alive = set(range(n + 1))
    for p in sympy_free_primes(n):
        alive -= {i for i in alive if i % p == residue % p}
    return tuple(sorted(alive))


def test_sieve_examples():
    assert sieve_solve(10, lambda p, n: 1).entries == _simulate_sieve(10, 1) == (0, 2)
    assert sieve_solve(2, lambda p, n: 0).entries == (1,)


def test_constant_priority_gives_two_tuple_everywhere():
    for n in range(4, 201):
        out = sieve_solve(n, lambda p, n: 1)
        assert out.entries == (0, 2), n


def test_sieve_output_always_admissible():
    import random
    rng = random.Random(0)
    for _ in range(20):
        n = rng.randrange(4, 300)
        shift = rng.randrange(100)
        out = sieve_solve(n, lambda p, n: (p * 7 + shift) % p)
        assert verify_admissible(out)
        assert out.diameter <= n


def test_sieve_large_self_check():
    out = sieve_solve(5000, lambda p, n: (n // p) % p)
    assert verify_admissible(out)
    assert out.diameter <= 5000


def test_sieve_priority_failure_propagates():
    def bad(p, n):
        raise RuntimeError("boom")
    with pytest.raises(RuntimeError):
        sieve_solve(10, bad)
