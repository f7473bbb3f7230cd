"""Isosceles-free grid subsets, planar or toroidal, with all solver variants.

A subset is isosceles-free when no three distinct points have two equal
pairwise distances; collinear 3-term progressions count (the middle point is
equidistant from the ends).  All checks work on squared distances, so the
criterion "some apex sees the same distance twice" is exact integer
arithmetic.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .capset import KernelError
from .priorities import PriorityOracle

Point = tuple[int, int]

PLANAR = "planar"
TORUS = "torus"
_GEOMETRIES = (PLANAR, TORUS)


def sqdist(a: Point, b: Point, n: int, geometry: str = PLANAR) -> int:
    """Squared distance; toroidal displacement wraps each coordinate to min(|d|, n-|d|)."""
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    if geometry == TORUS:
        dx = min(dx, n - dx)
        dy = min(dy, n - dy)
    return dx * dx + dy * dy


@dataclass
class GridSubset:
    """Points of the n x n grid, in insertion order."""

    n: int
    points: list[Point] = field(default_factory=list)
    geometry: str = PLANAR

    def __post_init__(self):
        if self.n < 1:
            raise KernelError(f"grid side must be >= 1, got {self.n}")
        if self.geometry not in _GEOMETRIES:
            raise KernelError(f"geometry must be one of {_GEOMETRIES}, got {self.geometry!r}")
        seen = set()
        for p in self.points:
            p = tuple(p)
            if not (0 <= p[0] < self.n and 0 <= p[1] < self.n):
                raise KernelError(f"point {p} outside [0,{self.n}) x [0,{self.n})")
            if p in seen:
                raise KernelError(f"duplicate point {p}")
            seen.add(p)
        self.points = [tuple(p) for p in self.points]

    @property
    def size(self) -> int:
        return len(self.points)


def grid_points(n: int) -> list[Point]:
    """All points in row-major order: (0,0), (0,1), ..., (n-1,n-1)."""
    return [(x, y) for x in range(n) for y in range(n)]


def verify_noiso(s: GridSubset) -> bool:
    """True iff no point sees the same squared distance to two other points."""
    pts = s.points
    for a in pts:
        seen = set()
        for b in pts:
            if b == a:
                continue
            d = sqdist(a, b, s.n, s.geometry)
            if d in seen:
                return False
            seen.add(d)
    return True


class _AddState:
    """Incremental membership: per-point sets of squared distances to the rest."""

    def __init__(self, n: int, geometry: str):
        self.n = n
        self.geometry = geometry
        self.points: list[Point] = []
        self.dists: dict[Point, set[int]] = {}

    def _d(self, a: Point, b: Point) -> int:
        return sqdist(a, b, self.n, self.geometry)

    def can_add_all(self, new_pts: list[Point]) -> bool:
        """Whether the whole batch can join without creating an isosceles triple.

        Checks intra-batch triples too, so symmetric orbits are accepted or
        rejected atomically.
        """
        new_pts = list(dict.fromkeys(new_pts))
        if any(v in self.dists for v in new_pts):
            return False
        extra: dict[Point, set[int]] = {v: set() for v in new_pts}
        for i, v in enumerate(new_pts):
            for a in itertools.chain(self.points, new_pts[:i]):
                d = self._d(a, v)
                if d in extra[v]:
                    return False
                if d in self.dists.get(a, ()) or d in extra.get(a, ()):
                    return False
                extra[v].add(d)
                extra.setdefault(a, set()).add(d)
        self._pending = extra
        return True

    def commit(self):
        for a, ds in self._pending.items():
            if a in self.dists:
                self.dists[a] |= ds
            else:
                self.dists[a] = ds
                self.points.append(a)

    def try_add(self, new_pts: list[Point]) -> bool:
        if self.can_add_all(new_pts):
            self.commit()
            return True
        return False


def _ordered_by_priority(elements: list, priority: PriorityOracle) -> list:
    # Stable sort: equal priorities keep the canonical (row-major) order.
    scores = {e: priority.score(e) for e in elements}
    return sorted(elements, key=scores.__getitem__, reverse=True)


def noiso_greedy_solve(n: int, priority: PriorityOracle, geometry: str = PLANAR) -> GridSubset:
    """Adds points in descending priority, skipping any that would create an
    isosceles triple.  Output is maximal under addition."""
    state = _AddState(n, geometry)
    for p in _ordered_by_priority(grid_points(n), priority):
        state.try_add([p])
    return GridSubset(n=n, points=state.points, geometry=geometry)


def noiso_removal_solve(n: int, priority: PriorityOracle, geometry: str = PLANAR) -> GridSubset:
    """Starts from the full grid and removes points in descending priority
    (highest removed first), stopping as soon as the remainder is
    isosceles-free.  The result is generally not maximal."""
    pts = grid_points(n)
    counts: dict[Point, Counter] = {p: Counter() for p in pts}
    dup: dict[Point, int] = {p: 0 for p in pts}
    for a, b in itertools.combinations(pts, 2):
        d = sqdist(a, b, n, geometry)
        for apex, other in ((a, b), (b, a)):
            counts[apex][d] += 1
            if counts[apex][d] == 2:
                dup[apex] += 1
    bad = sum(1 for p in pts if dup[p] > 0)

    alive = dict.fromkeys(pts, True)
    for victim in _ordered_by_priority(pts, priority):
        if bad == 0:
            break
        alive[victim] = False
        if dup[victim] > 0:
            bad -= 1
        del counts[victim], dup[victim]
        for a in counts:
            if not alive[a]:
                continue
            d = sqdist(a, victim, n, geometry)
            counts[a][d] -= 1
            if counts[a][d] == 1:
                dup[a] -= 1
                if dup[a] == 0:
                    bad -= 1
    return GridSubset(n=n, points=[p for p in pts if alive[p]], geometry=geometry)


# --- symmetry groups -------------------------------------------------------

def _flip_x(n: int):
    return lambda p: (n - 1 - p[0], p[1])


def _flip_y(n: int):
    return lambda p: (p[0], n - 1 - p[1])


def _swap(n: int):
    return lambda p: (p[1], p[0])


def _antiswap(n: int):
    return lambda p: (n - 1 - p[1], n - 1 - p[0])


@dataclass(frozen=True)
class SymmetryGroup:
    """One of the grid symmetry subgroups used for orbit-wise construction.

    axes4:  flips over the central vertical and horizontal axes (order 4).
    diag2:  flip over the main diagonal x = y (order 2).
    diags4: flips over both diagonals x = y and x + y = n - 1 (order 4).
    """

    kind: str

    KINDS = ("axes4", "diag2", "diags4")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise KernelError(f"unknown symmetry group {self.kind!r}")

    def generators(self, n: int) -> list[Callable[[Point], Point]]:
        if self.kind == "axes4":
            return [_flip_x(n), _flip_y(n)]
        if self.kind == "diag2":
            return [_swap(n)]
        return [_swap(n), _antiswap(n)]

    def elements(self, n: int) -> list[Callable[[Point], Point]]:
        ident = lambda p: p
        if self.kind == "axes4":
            fx, fy = _flip_x(n), _flip_y(n)
            return [ident, fx, fy, lambda p: fx(fy(p))]
        if self.kind == "diag2":
            return [ident, _swap(n)]
        sw, anti = _swap(n), _antiswap(n)
        return [ident, sw, anti, lambda p: sw(anti(p))]

    def orbit(self, p: Point, n: int) -> list[Point]:
        """Distinct images of p under the group, in row-major order."""
        return sorted({g(p) for g in self.elements(n)})

    def fundamental_domain(self, n: int) -> list[Point]:
        """One representative per orbit, in row-major order."""
        half = (n + 1) // 2
        if self.kind == "axes4":
            return [(x, y) for x in range(half) for y in range(half)]
        if self.kind == "diag2":
            return [(x, y) for x in range(n) for y in range(n) if x <= y]
        return [(x, y) for x in range(n) for y in range(n) if x <= y and x + y <= n - 1]


def noiso_symmetric_solve(n: int, priority: PriorityOracle, group: SymmetryGroup,
                          geometry: str = PLANAR) -> GridSubset:
    """Adds whole orbits at a time, in descending priority of the orbit's
    fundamental-domain representative.  An orbit is skipped if any of its
    points (including triples within the orbit) would break the constraint,
    so the result is invariant under the group."""
    state = _AddState(n, geometry)
    for rep in _ordered_by_priority(group.fundamental_domain(n), priority):
        state.try_add(group.orbit(rep, n))
    return GridSubset(n=n, points=state.points, geometry=geometry)


class ChooserError(RuntimeError):
    """The next-point chooser raised; counted as an evaluation failure."""


def noiso_nextpoint_solve(n: int, chooser: Callable[[list[Point]], Point], budget: int,
                          geometry: str = PLANAR) -> GridSubset:
    """Repeatedly asks `chooser` for the next point given the current set.

    Each suggestion consumes budget; suggestions that repeat, fall outside the
    grid, or would create an isosceles triple are skipped.
    """
    if budget < 1:
        raise KernelError(f"budget must be >= 1, got {budget}")
    state = _AddState(n, geometry)
    for _ in range(budget):
        try:
            raw = chooser(list(state.points))
        except Exception as exc:
            raise ChooserError(f"chooser failed: {exc!r}") from exc
        try:
            p = (int(raw[0]), int(raw[1]))
        except Exception:
            continue
        if not (0 <= p[0] < n and 0 <= p[1] < n):
            continue
        state.try_add([p])
    return GridSubset(n=n, points=state.points, geometry=geometry)


def oracle_chooser(oracle: PriorityOracle, n: int) -> Callable[[list[Point]], Point]:
    """Chooser that proposes unseen grid points in descending oracle priority."""
    order = _ordered_by_priority(grid_points(n), oracle)
    def choose(current: list[Point]) -> Point:
        have = set(current)
        for p in order:
            if p not in have:
                return p
        return order[-1]
    return choose


def max_noiso_bruteforce(n: int, geometry: str = PLANAR) -> int:
    """Exact maximum isosceles-free subset size by subset enumeration; n <= 4."""
    if n > 4:
        raise KernelError(f"brute force supports n <= 4, got {n}")
    pts = grid_points(n)
    m = len(pts)
    dist = [[sqdist(a, b, n, geometry) for b in pts] for a in pts]
    best = 0
    for mask in range(1 << m):
        size = mask.bit_count()
        if size <= best:
            continue
        members = [i for i in range(m) if mask >> i & 1]
        ok = True
        for a in members:
            seen = set()
            for b in members:
                if b == a:
                    continue
                d = dist[a][b]
                if d in seen:
                    ok = False
                    break
                seen.add(d)
            if not ok:
                break
        if ok:
            best = size
    return best
