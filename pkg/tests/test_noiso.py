import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evosearch.kernels import (
    ChooserError,
    ConstantOracle,
    GridSubset,
    KernelError,
    L2CenterOracle,
    RandomOracle,
    SymmetryGroup,
    grid_points,
    max_noiso_bruteforce,
    noiso_greedy_solve,
    noiso_nextpoint_solve,
    noiso_removal_solve,
    noiso_symmetric_solve,
    oracle_chooser,
    sqdist,
    verify_noiso,
)

from naive import naive_max_noiso, naive_noiso_ok

# Frozen from exhaustive enumeration over all subsets (naive_max_noiso).
MAX_PLANAR = {1: 1, 2: 2, 3: 4, 4: 6}
MAX_TORUS = {2: 2, 3: 2, 4: 4}


def test_verify_examples():
    assert not verify_noiso(GridSubset(n=4, points=[(0, 0), (0, 1), (1, 0)]))
    assert not verify_noiso(GridSubset(n=4, points=[(0, 0), (0, 1), (0, 2)]))
    assert verify_noiso(GridSubset(n=4, points=[(0, 0), (1, 0), (3, 0)]))


def test_malformed_points_rejected():
    with pytest.raises(KernelError):
        GridSubset(n=3, points=[(3, 0)])
    with pytest.raises(KernelError):
        GridSubset(n=3, points=[(0, 0), (0, 0)])
    with pytest.raises(KernelError):
        GridSubset(n=3, points=[], geometry="klein-bottle")


@settings(max_examples=400, deadline=None)
@given(st.integers(2, 6), st.sampled_from(["planar", "torus"]), st.data())
def test_verify_matches_naive_enumeration(n, geometry, data):
    pts = data.draw(st.lists(st.sampled_from(grid_points(n)), max_size=8, unique=True))
    s = GridSubset(n=n, points=pts, geometry=geometry)
    assert verify_noiso(s) == naive_noiso_ok(pts, n, geometry)


def test_bruteforce_matches_independent_search():
    for n, want in MAX_PLANAR.items():
        assert max_noiso_bruteforce(n) == want
        if n <= 3:
            assert naive_max_noiso(n) == want
    for n, want in MAX_TORUS.items():
        assert max_noiso_bruteforce(n, "torus") == want
        if n <= 3:
            assert naive_max_noiso(n, "torus") == want
    with pytest.raises(KernelError):
        max_noiso_bruteforce(5)


def test_greedy_bounded_by_bruteforce_with_equality_small_n():
    for n in (1, 2, 3):
        cap = MAX_PLANAR[n]
        hit = False
        for seed in range(150):
            out = noiso_greedy_solve(n, RandomOracle(seed))
            assert verify_noiso(out)
            assert out.size <= cap
            hit = hit or out.size == cap
        assert hit, f"no random priority reached the max at n={n}"
    for seed in range(50):
        assert noiso_greedy_solve(4, RandomOracle(seed)).size <= MAX_PLANAR[4]


def test_greedy_outputs_are_maximal():
    for n in (2, 3, 5, 8, 12):
        out = noiso_greedy_solve(n, RandomOracle(n))
        chosen = set(out.points)
        for p in grid_points(n):
            if p in chosen:
                continue
            assert not verify_noiso(GridSubset(n=n, points=out.points + [p]))


def test_greedy_n2_always_two():
    for oracle in (ConstantOracle(), RandomOracle(1), L2CenterOracle(2)):
        assert noiso_greedy_solve(2, oracle).size == 2


def test_greedy_self_check_n64():
    out = noiso_greedy_solve(64, L2CenterOracle(64))
    assert verify_noiso(out)


def test_removal_examples():
    assert noiso_removal_solve(1, ConstantOracle()).points == [(0, 0)]
    for seed in range(10):
        out = noiso_removal_solve(2, RandomOracle(seed))
        assert out.size == 2
        assert verify_noiso(out)
    out = noiso_removal_solve(32, RandomOracle(3))
    assert verify_noiso(out)


def test_removal_stops_at_first_free_subset():
    # Re-simulate: strip points in the same deterministic order and stop at
    # the first isosceles-free prefix; the sizes must agree.
    for n in (3, 4, 5):
        for seed in (0, 1):
            oracle = RandomOracle(seed)
            order = sorted(grid_points(n), key=oracle.score, reverse=True)
            remaining = list(grid_points(n))
            removed = 0
            while not naive_noiso_ok(remaining, n):
                remaining.remove(order[removed])
                removed += 1
            got = noiso_removal_solve(n, RandomOracle(seed))
            assert sorted(got.points) == sorted(remaining)


def test_removal_result_can_be_non_maximal():
    # Not asserted for every seed; one witness suffices.
    witnesses = 0
    for seed in range(30):
        out = noiso_removal_solve(6, RandomOracle(seed))
        chosen = set(out.points)
        addable = any(
            verify_noiso(GridSubset(n=6, points=out.points + [p]))
            for p in grid_points(6) if p not in chosen
        )
        witnesses += addable
    assert witnesses > 0


def test_symmetry_group_basics():
    g = SymmetryGroup("diag2")
    assert g.orbit((0, 1), 3) == [(0, 1), (1, 0)]
    axes = SymmetryGroup("axes4")
    assert set(axes.orbit((0, 1), 4)) == {(0, 1), (3, 1), (0, 2), (3, 2)}
    with pytest.raises(KernelError):
        SymmetryGroup("spiral")


def test_fundamental_domains_cover_grid_once():
    for kind in SymmetryGroup.KINDS:
        g = SymmetryGroup(kind)
        for n in (3, 4, 5, 8):
            seen = {}
            for rep in g.fundamental_domain(n):
                for p in g.orbit(rep, n):
                    assert p not in seen, (kind, n, p)
                    seen[p] = rep
            assert len(seen) == n * n


def test_symmetric_solve_invariant_and_valid():
    for kind in SymmetryGroup.KINDS:
        g = SymmetryGroup(kind)
        for n, seed in ((3, 0), (13, 1), (48, 2)):
            out = noiso_symmetric_solve(n, RandomOracle(seed), g)
            assert verify_noiso(out)
            pts = set(out.points)
            for transform in g.elements(n):
                assert {transform(p) for p in pts} == pts


def test_symmetric_solve_never_beats_known_max_n13():
    for seed in range(25):
        out = noiso_symmetric_solve(13, RandomOracle(seed), SymmetryGroup("diags4"))
        assert out.size <= 22


def test_nextpoint_budget_and_dedup():
    calls = 0

    def stuck(current):
        nonlocal calls
        calls += 1
        return (0, 0)

    out = noiso_nextpoint_solve(32, stuck, budget=3 * 32)
    assert calls == 96
    assert out.points == [(0, 0)]

    out = noiso_nextpoint_solve(8, oracle_chooser(RandomOracle(0), 8), budget=64)
    assert verify_noiso(out)


def test_nextpoint_skips_out_of_grid_and_propagates_chooser_errors():
    suggestions = iter([(99, 99), (-1, 0), (1, 1), (2, "x")])

    def chooser(current):
        return next(suggestions)

    out = noiso_nextpoint_solve(4, chooser, budget=4)
    assert out.points == [(1, 1)]

    def broken(current):
        raise ValueError("no idea")

    with pytest.raises(ChooserError):
        noiso_nextpoint_solve(4, broken, budget=2)


def test_verify_agrees_on_transformed_copies():
    rng = random.Random(5)
    for kind in SymmetryGroup.KINDS:
        g = SymmetryGroup(kind)
        for _ in range(40):
            n = rng.randrange(2, 8)
            pts = rng.sample(grid_points(n), k=min(rng.randrange(1, 7), n * n))
            base = verify_noiso(GridSubset(n=n, points=pts))
            for transform in g.elements(n):
                image = list({transform(p) for p in pts})
                assert verify_noiso(GridSubset(n=n, points=image)) == base


def test_torus_agrees_with_planar_when_spread_is_small():
    rng = random.Random(11)
    for _ in range(60):
        n = rng.randrange(9, 16)
        # confine points to a corner so every displacement is < n/2
        lim = (n - 1) // 2
        cands = [(x, y) for x in range(lim) for y in range(lim)]
        pts = rng.sample(cands, k=min(5, len(cands)))
        planar = verify_noiso(GridSubset(n=n, points=pts, geometry="planar"))
        torus = verify_noiso(GridSubset(n=n, points=pts, geometry="torus"))
        assert planar == torus


def test_torus_wraparound_distance():
    assert sqdist((0, 0), (0, 7), 8, "torus") == 1
    assert sqdist((0, 0), (0, 7), 8, "planar") == 49
