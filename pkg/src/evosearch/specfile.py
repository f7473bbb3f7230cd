"""Specification files and prompt assembly.

A specification file is guest-language source with two reserved decorator
lines, `@funsearch.run` on the scoring entry point and `@funsearch.evolve`
on the function the search mutates, plus an optional system-prompt block
between the literal marker lines `### SYSTEM PROMPT` / `### END SYSTEM
PROMPT`.
"""

from __future__ import annotations

import ast
import io
import textwrap
import tokenize
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

RUN_DECORATOR = "@funsearch.run"
EVOLVE_DECORATOR = "@funsearch.evolve"
SYSTEM_PROMPT_OPEN = "### SYSTEM PROMPT"
SYSTEM_PROMPT_CLOSE = "### END SYSTEM PROMPT"


class SpecFormatError(ValueError):
    """The spec file or a candidate program violates the format contract."""


class ExtractionFailure(RuntimeError):
    """No usable function definition found in a model response."""


@dataclass
class ProblemSpec:
    """Parsed specification file."""

    raw_text: str
    system_prompt: str | None
    header: str                 # module docstring, imports, any preamble
    run_entry: str              # name of the run-decorated function
    evolve_name: str
    evolve_signature: str       # `def name(...)` line(s), through the colon
    evolve_docstring: str
    evolve_source: str          # full evolved function, decorator excluded
    evolve_arity: int
    body_indent: str = "  "
    _prefix: str = field(default="", repr=False)   # program text before the evolve def
    _suffix: str = field(default="", repr=False)   # program text after the evolve def

    @property
    def fixed_body(self) -> str:
        """Everything except the evolved function."""
        return self._prefix + self._suffix


@dataclass
class PromptBundle:
    system_prompt: str
    user_prompt: str
    source_programs: list[tuple[object, float]]
    expected_next_version: int


@dataclass
class CandidateCode:
    source: str
    priority_source: str
    origin: str = "unknown"
    parent_ids: list = field(default_factory=list)


def _strip_marker_block(text: str) -> tuple[str | None, str]:
    lines = text.splitlines()
    try:
        start = next(i for i, ln in enumerate(lines) if ln.strip() == SYSTEM_PROMPT_OPEN)
    except StopIteration:
        return None, text
    try:
        stop = next(i for i in range(start + 1, len(lines))
                    if lines[i].strip() == SYSTEM_PROMPT_CLOSE)
    except StopIteration:
        raise SpecFormatError(f"{SYSTEM_PROMPT_OPEN} without matching close marker")
    raw = "\n".join(lines[start + 1:stop]).strip()
    if raw.startswith('"""') and raw.endswith('"""') and len(raw) >= 6:
        raw = raw[3:-3].strip()
    program = "\n".join(lines[:start] + lines[stop + 1:])
    if not program.endswith("\n"):
        program += "\n"
    return (raw or None), program


def _decorated_function(tree: ast.Module, lines: list[str], marker: str) -> ast.FunctionDef:
    rows = [i for i, ln in enumerate(lines) if ln.strip() == marker]
    if len(rows) != 1:
        raise SpecFormatError(f"expected exactly one {marker} line, found {len(rows)}")
    after = rows[0] + 1  # 0-based index of the line following the decorator
    for node in tree.body:
        if isinstance(node, ast.FunctionDef) and node.lineno - 1 >= after:
            return node
    raise SpecFormatError(f"{marker} is not followed by a function definition")


def parse_spec(text: str) -> ProblemSpec:
    """Parses a specification file; see the module docstring for the format."""
    if not text.strip():
        raise SpecFormatError("empty spec file")
    system_prompt, program = _strip_marker_block(text)
    lines = program.splitlines()
    try:
        tree = ast.parse(program)
    except SyntaxError as exc:
        raise SpecFormatError(f"spec file is not valid source: {exc}") from exc

    run_fn = _decorated_function(tree, lines, RUN_DECORATOR)
    evolve_fn = _decorated_function(tree, lines, EVOLVE_DECORATOR)
    if run_fn is evolve_fn:
        raise SpecFormatError("run and evolve decorators target the same function")

    sig_end = evolve_fn.body[0].lineno - 1          # line before the first body stmt
    signature = "\n".join(lines[evolve_fn.lineno - 1:sig_end])
    first_body = lines[evolve_fn.body[0].lineno - 1]
    indent = first_body[:len(first_body) - len(first_body.lstrip())] or "  "

    def_starts = []
    for node in tree.body:
        if isinstance(node, ast.FunctionDef):
            start = min([node.lineno] + [d.lineno for d in node.decorator_list]) - 1
            def_starts.append(start)
    header = "\n".join(lines[:min(def_starts)]).rstrip() + "\n" if def_starts else program

    evolve_start = evolve_fn.lineno - 1
    evolve_end = evolve_fn.end_lineno  # exclusive line index
    evolve_source = "\n".join(lines[evolve_start:evolve_end]) + "\n"
    prefix = "\n".join(lines[:evolve_start]) + ("\n" if evolve_start else "")
    suffix = "\n".join(lines[evolve_end:])
    if suffix and not suffix.endswith("\n"):
        suffix += "\n"

    return ProblemSpec(
        raw_text=text,
        system_prompt=system_prompt,
        header=header,
        run_entry=run_fn.name,
        evolve_name=evolve_fn.name,
        evolve_signature=signature,
        evolve_docstring=ast.get_docstring(evolve_fn) or "",
        evolve_source=evolve_source,
        evolve_arity=len(evolve_fn.args.args),
        body_indent=indent,
        _prefix=prefix,
        _suffix=suffix,
    )


def default_system_prompt(spec: ProblemSpec) -> str:
    """System prompt used when the spec file does not carry one."""
    parts = [
        "You are an expert Python programmer taking part in an evolutionary "
        f"search. Write an improved version of the function `{spec.evolve_name}`.",
    ]
    if spec.evolve_docstring:
        parts.append(f"Its purpose: {spec.evolve_docstring.strip()}")
    parts.append(
        "Reply with a single complete Python function definition, keeping the "
        "same signature. Make only small changes and keep the code short."
    )
    return " ".join(parts)


def system_prompt_for(spec: ProblemSpec) -> str:
    return spec.system_prompt if spec.system_prompt else default_system_prompt(spec)


def rename_identifier(source: str, old: str, new: str) -> str:
    """Renames every standalone identifier `old` to `new`, leaving strings and
    comments untouched.  `source` must tokenize (i.e. parse lexically)."""
    if old == new:
        return source
    lines = source.splitlines(keepends=True)
    spots = []
    for tok in tokenize.generate_tokens(io.StringIO(source).readline):
        if tok.type == tokenize.NAME and tok.string == old:
            spots.append((tok.start[0] - 1, tok.start[1]))
    for row, col in reversed(spots):
        line = lines[row]
        lines[row] = line[:col] + new + line[col + len(old):]
    return "".join(lines)


def _strip_decorators(source: str) -> str:
    lines = source.splitlines()
    i = 0
    while i < len(lines) and (not lines[i].strip() or lines[i].lstrip().startswith("@")):
        i += 1
    return "\n".join(lines[i:])


def _single_function(source: str) -> ast.FunctionDef:
    try:
        tree = ast.parse(textwrap.dedent(source))
    except SyntaxError as exc:
        raise SpecFormatError(f"program source does not parse: {exc}") from exc
    fns = [node for node in tree.body if isinstance(node, ast.FunctionDef)]
    if len(fns) != 1:
        raise SpecFormatError(f"expected a single function, found {len(fns)}")
    return fns[0]


def build_prompt(spec: ProblemSpec, programs: Sequence[tuple[str, float]],
                 ids: Sequence | None = None) -> PromptBundle:
    """Builds the completion prompt from stored programs.

    Programs are sorted ascending by score (equal scores keep list order, so
    pass them oldest first) and renamed to `<evolve>_v0 ... _v<k>`; the prompt
    ends with the header of the next version carrying the improved-version
    docstring.
    """
    if not programs:
        raise SpecFormatError("build_prompt needs at least one program")
    if ids is None:
        ids = list(range(len(programs)))
    order = sorted(range(len(programs)), key=lambda i: programs[i][1])

    name = spec.evolve_name
    rendered = []
    for version, idx in enumerate(order):
        source, _ = programs[idx]
        fn = _single_function(source)
        body = textwrap.dedent(_strip_decorators(source)).strip("\n")
        rendered.append(rename_identifier(body + "\n", fn.name, f"{name}_v{version}"))

    next_version = len(programs)
    signature = rename_identifier(spec.evolve_signature + "\n", name,
                                  f"{name}_v{next_version}").rstrip("\n")
    docline = f'{spec.body_indent}"""Improved version of `{name}_v{next_version - 1}`."""'
    header = f"{signature}\n{docline}\n"

    sections = [spec.header.rstrip("\n")]
    sections.extend(block.rstrip("\n") for block in rendered)
    sections.append(header.rstrip("\n"))
    user_prompt = "\n\n".join(sections) + "\n"

    return PromptBundle(
        system_prompt=system_prompt_for(spec),
        user_prompt=user_prompt,
        source_programs=[(ids[idx], programs[idx][1]) for idx in order],
        expected_next_version=next_version,
    )


def _fence_stripped(text: str) -> str:
    return "\n".join(ln for ln in text.splitlines() if not ln.lstrip().startswith("```"))


def extract_function(response_text: str, expected_name_prefix: str) -> str:
    """Pulls the first complete function definition whose name starts with the
    prefix out of a model response, and renames it to the canonical name.

    Raises ExtractionFailure when no parseable matching function exists.
    """
    text = _fence_stripped(response_text or "")
    lines = text.splitlines()
    for i, line in enumerate(lines):
        stripped = line.lstrip()
        if not stripped.startswith("def "):
            continue
        rest = stripped[4:].lstrip()
        if not rest.startswith(expected_name_prefix):
            continue
        tail = lines[i:]
        while tail:
            candidate = textwrap.dedent("\n".join(tail)) + "\n"
            try:
                tree = ast.parse(candidate)
            except SyntaxError:
                tail = tail[:-1]
                continue
            fns = [n for n in tree.body if isinstance(n, ast.FunctionDef)]
            if fns and fns[0].name.startswith(expected_name_prefix):
                fn = fns[0]
                fn_lines = candidate.splitlines()[fn.lineno - 1:fn.end_lineno]
                source = "\n".join(fn_lines) + "\n"
                return rename_identifier(source, fn.name, expected_name_prefix)
            break
    raise ExtractionFailure(
        f"no function starting with {expected_name_prefix!r} found in response")


BUILTIN_SPECS = ("capset", "nat", "noiso", "noiso_torus", "noiso_removal",
                 "noiso_symmetric", "noiso_nextpoint", "noiso_smallmax", "prime_count")


def load_builtin_spec(name: str) -> str:
    """Source text of one of the bundled specification files."""
    if name not in BUILTIN_SPECS:
        raise SpecFormatError(f"no builtin spec {name!r}; have {BUILTIN_SPECS}")
    return (resources.files("evosearch") / "specs" / f"{name}.py").read_text(encoding="utf-8")


def assemble_candidate(spec: ProblemSpec, priority_source: str, origin: str = "unknown",
                       parents: Sequence | None = None) -> CandidateCode:
    """Splices an evolved function into the spec, leaving everything else,
    including the run entry, untouched."""
    fn = _single_function(priority_source)
    if len(fn.args.args) != spec.evolve_arity:
        raise SpecFormatError(
            f"evolved function takes {len(fn.args.args)} args, "
            f"expected {spec.evolve_arity}")
    body = textwrap.dedent(_strip_decorators(priority_source)).strip("\n") + "\n"
    body = rename_identifier(body, fn.name, spec.evolve_name)
    source = spec._prefix + body + spec._suffix
    return CandidateCode(source=source, priority_source=body, origin=origin,
                         parent_ids=list(parents or []))
