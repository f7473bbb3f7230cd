"""Construction artifacts: the JSON interchange format and native re-verification."""

from __future__ import annotations

import json
from typing import Any

from .admissible import AdmissibleTuple, verify_admissible
from .capset import CapSetInstance, KernelError, verify_capset
from .noiso import PLANAR, GridSubset, verify_noiso

PROBLEMS = ("capset", "nat", "noiso")

# How a reported score is recomputed from a verified construction.
OBJECTIVES = ("size", "size_over_n", "neg_size")


def from_json(obj: dict) -> CapSetInstance | AdmissibleTuple | GridSubset:
    """Parses {problem, n, geometry?, elements} into the native instance type."""
    try:
        problem = obj["problem"]
        elements = obj["elements"]
    except (TypeError, KeyError) as exc:
        raise KernelError(f"construction object missing field: {exc}") from exc
    if problem == "capset":
        return CapSetInstance(n=int(obj["n"]), points=[tuple(map(int, v)) for v in elements])
    if problem == "nat":
        return AdmissibleTuple(tuple(int(e) for e in elements))
    if problem == "noiso":
        return GridSubset(n=int(obj["n"]),
                          points=[(int(p[0]), int(p[1])) for p in elements],
                          geometry=obj.get("geometry", PLANAR))
    raise KernelError(f"unknown problem kind {problem!r}")


def to_json(inst: CapSetInstance | AdmissibleTuple | GridSubset,
            objective: str = "size") -> dict:
    if isinstance(inst, CapSetInstance):
        obj: dict[str, Any] = {"problem": "capset", "n": inst.n,
                               "elements": [list(v) for v in inst.points]}
    elif isinstance(inst, AdmissibleTuple):
        obj = {"problem": "nat", "n": inst.diameter, "elements": list(inst.entries)}
    elif isinstance(inst, GridSubset):
        obj = {"problem": "noiso", "n": inst.n, "geometry": inst.geometry,
               "elements": [list(p) for p in inst.points]}
    else:
        raise KernelError(f"not a construction: {type(inst)}")
    if objective != "size":
        obj["objective"] = objective
    return obj


def verify(inst: CapSetInstance | AdmissibleTuple | GridSubset) -> bool:
    if isinstance(inst, CapSetInstance):
        return verify_capset(inst)
    if isinstance(inst, AdmissibleTuple):
        return verify_admissible(inst)
    if isinstance(inst, GridSubset):
        return verify_noiso(inst)
    raise KernelError(f"not a construction: {type(inst)}")


def _size(inst) -> int:
    if isinstance(inst, AdmissibleTuple):
        return inst.k
    return inst.size


def rescore(obj: dict) -> float:
    """Recomputes the score a construction is worth, per its stated objective."""
    inst = from_json(obj)
    objective = obj.get("objective", "size")
    if objective == "size":
        return float(_size(inst))
    if objective == "neg_size":
        return float(-_size(inst))
    if objective == "size_over_n":
        n = int(obj["n"])
        return _size(inst) / n
    raise KernelError(f"unknown objective {objective!r}")


def check_construction(obj: dict, reported_score: float, tol: float = 1e-9) -> bool:
    """Native verification: the construction is valid and worth the reported score."""
    try:
        inst = from_json(obj)
        if not verify(inst):
            return False
        return abs(rescore(obj) - reported_score) <= tol * max(1.0, abs(reported_score))
    except (KernelError, ValueError, TypeError):
        return False


def load_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def dump_file(obj: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
