import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evosearch.kernels import (
    CapSetInstance,
    ConstantOracle,
    KernelError,
    RandomOracle,
    all_vectors,
    capset_greedy_solve,
    max_capset_bruteforce,
    verify_capset,
)

from naive import naive_capset_ok, naive_max_capset


def test_verify_small_cases():
    assert verify_capset(CapSetInstance(n=1, points=[(0,), (1,)]))
    assert not verify_capset(CapSetInstance(n=1, points=[(0,), (1,), (2,)]))
    # All 4 triples of the 2x2 square of vectors checked by hand: sums nonzero.
    assert verify_capset(CapSetInstance(n=2, points=[(0, 0), (0, 1), (1, 0), (1, 1)]))


def test_malformed_instances_rejected():
    with pytest.raises(KernelError):
        CapSetInstance(n=1, points=[(3,)])
    with pytest.raises(KernelError):
        CapSetInstance(n=2, points=[(0, 0), (0, 0)])
    with pytest.raises(KernelError):
        CapSetInstance(n=2, points=[(0,)])


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 3), st.data())
def test_verify_matches_naive_enumeration(n, data):
    vectors = all_vectors(n)
    subset = data.draw(st.lists(st.sampled_from(vectors), max_size=9, unique=True))
    inst = CapSetInstance(n=n, points=subset)
    assert verify_capset(inst) == naive_capset_ok(subset)


def test_bruteforce_matches_independent_search():
    assert max_capset_bruteforce(0) == 1
    assert max_capset_bruteforce(1) == naive_max_capset(1) == 2
    assert max_capset_bruteforce(2) == naive_max_capset(2) == 4
    with pytest.raises(KernelError):
        max_capset_bruteforce(3)


def test_greedy_constant_n1_hits_maximum():
    out = capset_greedy_solve(1, ConstantOracle())
    assert out.size == 2
    assert verify_capset(out)


def test_greedy_never_beats_bruteforce_and_sometimes_matches():
    for n in (1, 2):
        cap = max_capset_bruteforce(n)
        hit = False
        for seed in range(200):
            out = capset_greedy_solve(n, RandomOracle(seed))
            assert verify_capset(out)
            assert out.size <= cap
            hit = hit or out.size == cap
        assert hit


def test_greedy_output_is_maximal():
    for n in (1, 2, 3):
        for seed in (0, 1, 2):
            out = capset_greedy_solve(n, RandomOracle(seed))
            chosen = set(out.points)
            for v in all_vectors(n):
                if v in chosen:
                    continue
                assert not verify_capset(CapSetInstance(n=n, points=out.points + [v])), \
                    f"vector {v} could still be added at n={n}"


def test_greedy_deterministic_given_seed():
    a = capset_greedy_solve(3, RandomOracle(99))
    b = capset_greedy_solve(3, RandomOracle(99))
    assert a.points == b.points


def test_greedy_self_check_at_n8():
    out = capset_greedy_solve(8, RandomOracle(4))
    assert verify_capset(out)
    assert out.size > 0
