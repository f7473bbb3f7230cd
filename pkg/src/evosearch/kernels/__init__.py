"""Native problem kernels: verifiers, solvers, brute-force oracles, baselines."""

from .admissible import AdmissibleTuple, primes_upto, sieve_solve, verify_admissible
from .capset import (
    CapSetInstance,
    KernelError,
    all_vectors,
    capset_greedy_solve,
    max_capset_bruteforce,
    verify_capset,
)
from .construction import check_construction, from_json, rescore, to_json, verify
from .noiso import (
    PLANAR,
    TORUS,
    ChooserError,
    GridSubset,
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
from .priorities import (
    AffineOracle,
    ConstantOracle,
    FunctionOracle,
    L2CenterOracle,
    PriorityOracle,
    RandomOracle,
    TableOracle,
    baseline_family,
    baseline_priority,
)
from .sweep import VARIANTS, SweepRow, generalization_sweep, solve_variant, sweep_csv

__all__ = [name for name in dir() if not name.startswith("_")]
