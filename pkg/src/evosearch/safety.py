"""Static pre-execution screening of generated guest code.

The screen is lexical on purpose: candidates may be syntactically broken and
still must be screened cheaply, and the sandbox remains the real enforcement
boundary.  Strings and comments are skipped, so a forbidden token inside a
literal does not trip the screen.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

DEFAULT_ALLOW_IMPORTS = frozenset({
    "math", "itertools", "functools", "collections", "random", "numpy", "funsearch",
})

DEFAULT_FORBID_TOKENS = frozenset({
    "eval", "exec", "open", "compile", "__import__", "system", "popen", "spawn",
    "socket", "connect", "remove", "rmdir", "unlink", "fork", "kill",
})

DEFAULT_MAX_LEN = 20000

_STRING_PREFIXES = {"r", "b", "u", "f", "rb", "br", "fr", "rf", "bf", "fb"}
_KEYWORDS_NOT_ROOTS = {"import", "as"}


@dataclass(frozen=True)
class SafetyPolicy:
    allow_imports: frozenset = DEFAULT_ALLOW_IMPORTS
    forbid_tokens: frozenset = DEFAULT_FORBID_TOKENS
    max_len: int = DEFAULT_MAX_LEN

    def __post_init__(self):
        object.__setattr__(self, "allow_imports", frozenset(self.allow_imports))
        object.__setattr__(self, "forbid_tokens", frozenset(self.forbid_tokens))
        overlap = self.allow_imports & self.forbid_tokens
        if overlap:
            raise ValueError(f"allowlist and forbidden tokens overlap: {sorted(overlap)}")

    @classmethod
    def from_json(cls, text: str) -> "SafetyPolicy":
        data = json.loads(text)
        return cls(
            allow_imports=frozenset(data.get("allow_imports", DEFAULT_ALLOW_IMPORTS)),
            forbid_tokens=frozenset(data.get("forbid_tokens", DEFAULT_FORBID_TOKENS)),
            max_len=int(data.get("max_len", DEFAULT_MAX_LEN)),
        )


@dataclass(frozen=True)
class Violation:
    rule: str       # import | forbidden-call | dunder-attribute | max-len
    token: str
    line: int

    def __str__(self):
        return f"{self.rule}: {self.token!r} at line {self.line}"


def _tokens(code: str):
    """Yields ('name'|'op', text, line); strings and comments are consumed silently.

    Never raises, whatever the input looks like.
    """
    i, line, n = 0, 1, len(code)
    while i < n:
        c = code[i]
        if c == "\n":
            yield "op", "\n", line
            line += 1
            i += 1
        elif c in " \t\r\f\v":
            i += 1
        elif c == "\\" and i + 1 < n and code[i + 1] == "\n":
            line += 1
            i += 2  # explicit continuation: not a statement boundary
        elif c == "#":
            while i < n and code[i] != "\n":
                i += 1
        elif c in "\"'":
            i, line = _skip_string(code, i, line)
        elif c.isdigit():
            while i < n and (code[i].isalnum() or code[i] in "._"):
                i += 1
        elif c.isalpha() or c == "_":
            start = i
            while i < n and (code[i].isalnum() or code[i] == "_"):
                i += 1
            word = code[start:i]
            if word.lower() in _STRING_PREFIXES and i < n and code[i] in "\"'":
                i, line = _skip_string(code, i, line)
            else:
                yield "name", word, line
        else:
            yield "op", c, line
            i += 1


def _skip_string(code: str, i: int, line: int) -> tuple[int, int]:
    quote = code[i]
    n = len(code)
    triple = code[i:i + 3] == quote * 3
    i += 3 if triple else 1
    while i < n:
        c = code[i]
        if c == "\\":
            i += 2
            continue
        if c == "\n":
            line += 1
            if not triple:
                return i + 1, line  # unterminated single-quote string: give up at EOL
            i += 1
            continue
        if c == quote and (not triple or code[i:i + 3] == quote * 3):
            return i + (3 if triple else 1), line
        i += 1
    return n, line  # unterminated: swallow the rest


def screen(code: str, policy: SafetyPolicy | None = None) -> Violation | None:
    """Returns None when the code passes, otherwise the first Violation."""
    policy = policy or SafetyPolicy()
    if len(code) > policy.max_len:
        return Violation("max-len", f"{len(code)} chars", 1)

    toks = list(_tokens(code))
    depth = 0
    stmt_start = True
    import_mode = None   # None | "import" | "from" | "from-done"
    expect_root = False
    prev: tuple[str, str] | None = None

    for idx, (kind, text, line) in enumerate(toks):
        if kind == "op":
            if text in "([{":
                depth += 1
            elif text in ")]}":
                depth = max(0, depth - 1)
            if depth == 0:
                if text == "\n" or text == ";":
                    stmt_start = True
                    import_mode = None
                    expect_root = False
                elif text == ":":
                    stmt_start = True
                elif import_mode == "import" and text == ",":
                    expect_root = True
            prev = (kind, text)
            continue

        nxt = next(((k, t) for k, t, _ in toks[idx + 1:idx + 2]), ("op", ""))
        after_dot = prev is not None and prev == ("op", ".")

        if text.startswith("__") and after_dot:
            return Violation("dunder-attribute", text, line)

        if text in policy.forbid_tokens and nxt == ("op", "("):
            return Violation("forbidden-call", text, line)

        if stmt_start and text in ("import", "from"):
            import_mode = text
            expect_root = True
        elif expect_root and not after_dot:
            if text not in _KEYWORDS_NOT_ROOTS:
                if text not in policy.allow_imports:
                    return Violation("import", text, line)
                expect_root = False
                if import_mode == "from":
                    import_mode = "from-done"
        elif import_mode == "import" and text == "as":
            expect_root = False

        stmt_start = False
        prev = (kind, text)

    return None
