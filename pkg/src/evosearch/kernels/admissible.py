"""Admissible tuples: increasing integers missing a residue class modulo every prime."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

from .capset import KernelError


@functools.lru_cache(maxsize=None)
def primes_upto(n: int) -> tuple[int, ...]:
    """All primes <= n, by Eratosthenes."""
    if n < 2:
        return ()
    sieve = bytearray([1]) * (n + 1)
    sieve[0] = sieve[1] = 0
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p:: p] = bytearray(len(sieve[p * p:: p]))
    return tuple(i for i in range(2, n + 1) if sieve[i])


@dataclass
class AdmissibleTuple:
    entries: tuple[int, ...]

    def __post_init__(self):
        self.entries = tuple(int(e) for e in self.entries)
        if any(e < 0 for e in self.entries):
            raise KernelError("entries must be non-negative")
        if any(a >= b for a, b in zip(self.entries, self.entries[1:])):
            raise KernelError("entries must be strictly increasing")

    @property
    def k(self) -> int:
        return len(self.entries)

    @property
    def diameter(self) -> int:
        if not self.entries:
            return 0
        return self.entries[-1] - self.entries[0]

    def normalized(self) -> "AdmissibleTuple":
        if not self.entries:
            return self
        base = self.entries[0]
        return AdmissibleTuple(tuple(e - base for e in self.entries))


def verify_admissible(t: AdmissibleTuple) -> bool:
    """True iff the entries omit at least one residue class modulo every prime.

    Only primes p <= k need checking: k entries cannot occupy all p classes
    when p > k.
    """
    entries = t.entries
    k = len(entries)
    for p in primes_upto(k):
        if len({e % p for e in entries}) == p:
            return False
    return True


def sieve_solve(n: int, priority: Callable[[int, int], int]) -> AdmissibleTuple:
    """Sieves [0, n]: for each prime p <= n, removes the class priority(p, n) mod p.

    Whatever survives is admissible by construction and has diameter <= n.
    """
    if n < 2:
        raise KernelError(f"diameter bound must be >= 2, got {n}")
    alive = bytearray([1]) * (n + 1)
    for p in primes_upto(n):
        r = int(priority(p, n)) % p
        for i in range(r, n + 1, p):
            alive[i] = 0
    return AdmissibleTuple(tuple(i for i in range(n + 1) if alive[i]))
