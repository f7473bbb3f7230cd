"""Cap sets: subsets of (Z/3Z)^n in which no three distinct vectors sum to zero."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .priorities import PriorityOracle

Vector = tuple[int, ...]


class KernelError(ValueError):
    """Malformed instance or out-of-capacity request."""


@dataclass
class CapSetInstance:
    """A candidate cap set: `points` are length-`n` vectors over {0,1,2}, in insertion order."""

    n: int
    points: list[Vector] = field(default_factory=list)

    def __post_init__(self):
        if self.n < 0:
            raise KernelError(f"dimension must be non-negative, got {self.n}")
        seen = set()
        for p in self.points:
            p = tuple(p)
            if len(p) != self.n:
                raise KernelError(f"vector {p} has length {len(p)}, expected {self.n}")
            if any(c not in (0, 1, 2) for c in p):
                raise KernelError(f"vector {p} has a coordinate outside {{0,1,2}}")
            if p in seen:
                raise KernelError(f"duplicate vector {p}")
            seen.add(p)
        self.points = [tuple(p) for p in self.points]

    @property
    def size(self) -> int:
        return len(self.points)


def all_vectors(n: int) -> list[Vector]:
    """All 3^n vectors in lexicographic order."""
    return list(itertools.product((0, 1, 2), repeat=n))


def _third(a: Vector, b: Vector) -> Vector:
    # The unique c with a + b + c = 0 (mod 3). c coincides with a or b only when a == b.
    return tuple((-x - y) % 3 for x, y in zip(a, b))


def verify_capset(inst: CapSetInstance) -> bool:
    """True iff no three pairwise-distinct vectors of `inst` sum to the zero vector mod 3."""
    pts = inst.points
    index = set(pts)
    for i, a in enumerate(pts):
        for b in pts[i + 1:]:
            c = _third(a, b)
            if c != a and c != b and c in index:
                return False
    return True


def capset_greedy_solve(n: int, priority: PriorityOracle) -> CapSetInstance:
    """Greedy cap-set construction.

    Considers all vectors in descending priority (ties broken by lexicographic
    order) and adds each one unless it would complete a zero-sum triple with
    two vectors already chosen.  The result is maximal: by the time the pass
    ends, every vector has either been added or permanently blocked.
    """
    if n < 1:
        raise KernelError(f"dimension must be >= 1, got {n}")
    vectors = all_vectors(n)
    scores = {v: priority.score(v) for v in vectors}
    ordered = sorted(vectors, key=scores.__getitem__, reverse=True)

    chosen: list[Vector] = []
    member = set()
    blocked = set()
    for v in ordered:
        if v in blocked or v in member:
            continue
        for a in chosen:
            blocked.add(_third(a, v))
        member.add(v)
        chosen.append(v)
    return CapSetInstance(n=n, points=chosen)


def max_capset_bruteforce(n: int) -> int:
    """Exact maximum cap-set size by exhaustive subset enumeration; capped at n <= 2."""
    if n > 2:
        raise KernelError(f"brute force supports n <= 2, got {n}")
    if n == 0:
        return 1  # the single empty vector; no triple of distinct vectors exists
    vectors = all_vectors(n)
    m = len(vectors)
    best = 0
    for mask in range(1 << m):
        size = mask.bit_count()
        if size <= best:
            continue
        subset = [vectors[i] for i in range(m) if mask >> i & 1]
        if verify_capset(CapSetInstance(n=n, points=subset)):
            best = size
    return best
