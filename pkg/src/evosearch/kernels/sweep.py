"""Generalization sweeps: run a priority family through a solver variant over many n."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Sequence

from .capset import KernelError
from .noiso import (
    PLANAR,
    GridSubset,
    SymmetryGroup,
    noiso_greedy_solve,
    noiso_nextpoint_solve,
    noiso_removal_solve,
    noiso_symmetric_solve,
    oracle_chooser,
    verify_noiso,
)
from .priorities import PriorityOracle

VARIANTS = ("basic", "torus", "removal", "symmetric", "nextpoint", "smallmax")

CSV_HEADER = "n,size,size_over_n,ok"


@dataclass
class SweepRow:
    n: int
    size: int | None
    ok: bool

    def csv(self, negate: bool = False) -> str:
        if self.size is None:
            return f"{self.n},,,false"
        value = -self.size if negate else self.size
        return f"{self.n},{value},{value / self.n:.6g},{'true' if self.ok else 'false'}"


def solve_variant(variant: str, n: int, priority: PriorityOracle,
                  group: SymmetryGroup | None = None,
                  budget: int | None = None) -> GridSubset:
    """Runs one no-isosceles variant natively. smallmax shares the additive solver;
    only its scoring differs."""
    if variant in ("basic", "smallmax"):
        return noiso_greedy_solve(n, priority, PLANAR)
    if variant == "torus":
        return noiso_greedy_solve(n, priority, "torus")
    if variant == "removal":
        return noiso_removal_solve(n, priority, PLANAR)
    if variant == "symmetric":
        return noiso_symmetric_solve(n, priority, group or SymmetryGroup("diags4"), PLANAR)
    if variant == "nextpoint":
        b = budget if budget is not None else 3 * n
        return noiso_nextpoint_solve(n, oracle_chooser(priority, n), b, PLANAR)
    raise KernelError(f"unknown variant {variant!r}")


def generalization_sweep(priority_family: Callable[[int], PriorityOracle],
                         variant: str,
                         n_values: Sequence[int],
                         group: SymmetryGroup | None = None,
                         budget: int | None = None) -> list[SweepRow]:
    """One row per n; each solver output is re-verified before it is counted.

    A failure on one n marks that row failed and the sweep continues.
    """
    if not n_values:
        raise KernelError("n_values must be non-empty")
    if variant not in VARIANTS:
        raise KernelError(f"unknown variant {variant!r}")
    rows = []
    for n in n_values:
        try:
            result = solve_variant(variant, int(n), priority_family(int(n)),
                                   group=group, budget=budget)
            rows.append(SweepRow(n=int(n), size=result.size, ok=verify_noiso(result)))
        except Exception:
            rows.append(SweepRow(n=int(n), size=None, ok=False))
    return rows


def sweep_csv(rows: Sequence[SweepRow], variant: str = "basic") -> str:
    """CSV with header `n,size,size_over_n,ok`. For smallmax the size column is
    the score (negative size, lower is better), flagged in a comment line."""
    out = io.StringIO()
    negate = variant == "smallmax"
    if negate:
        out.write("# smallmax: size column holds the score (negative size); lower is better\n")
    out.write(CSV_HEADER + "\n")
    for row in rows:
        out.write(row.csv(negate=negate) + "\n")
    return out.getvalue()
