"""Extract C++ functions into performance-oriented records.

Functions are located without a compiler front-end: a signature heuristic
(name followed by a parenthesized parameter list followed by a brace block at
namespace/class scope) plus brace matching. False negatives only shrink the
downstream search space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional

from . import PerfOptError
from .lexer import BUILTIN_TYPES, LexError, Token, TokenKind, lex, render_source


class UnbalancedBraces(PerfOptError):
    """Brace matching ran off the end of the file."""


@dataclass(frozen=True)
class CostAnnotation:
    cycles_pct: float  # percent of binary total cycles, [0, 100]
    alloc_bytes_pct: Optional[float] = None
    source: str = ""

    def __post_init__(self):
        if not 0.0 <= self.cycles_pct <= 100.0:
            raise ValueError(f"cycles_pct out of range: {self.cycles_pct}")
        if self.alloc_bytes_pct is not None and not 0.0 <= self.alloc_bytes_pct <= 100.0:
            raise ValueError(f"alloc_bytes_pct out of range: {self.alloc_bytes_pct}")

    def to_json(self) -> dict:
        return {
            "cycles_pct": self.cycles_pct,
            "alloc_bytes_pct": self.alloc_bytes_pct,
            "source": self.source,
        }

    @staticmethod
    def from_json(obj: dict) -> "CostAnnotation":
        return CostAnnotation(obj["cycles_pct"], obj.get("alloc_bytes_pct"), obj.get("source", ""))


@dataclass(frozen=True)
class FunctionRecord:
    id: str
    name: str  # qualified where lexically visible
    file: str
    span: tuple[int, int]  # (start line, end line), inclusive
    tokens: tuple[Token, ...]
    type_set: frozenset[str] = field(default_factory=frozenset)
    cost: Optional[CostAnnotation] = None

    def source(self) -> str:
        return render_source(list(self.tokens))

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "file": self.file,
            "span": list(self.span),
            "tokens": [t.to_json() for t in self.tokens],
            "type_set": sorted(self.type_set),
            "cost": self.cost.to_json() if self.cost else None,
        }

    @staticmethod
    def from_json(obj: dict) -> "FunctionRecord":
        cost = CostAnnotation.from_json(obj["cost"]) if obj.get("cost") else None
        return FunctionRecord(
            id=obj["id"],
            name=obj["name"],
            file=obj["file"],
            span=tuple(obj["span"]),
            tokens=tuple(Token.from_json(t) for t in obj["tokens"]),
            type_set=frozenset(obj.get("type_set", ())),
            cost=cost,
        )


# Tokens that may legally sit between a parameter list's ")" and the body "{".
_TRAILING_OK = frozenset(
    ["const", "volatile", "noexcept", "override", "final", "mutable", "throw", "&", "&&", "try"]
)
_CV_MODS = frozenset(
    ["const", "constexpr", "consteval", "constinit", "volatile", "static", "register",
     "thread_local", "mutable", "inline", "struct", "class", "enum", "typename", "extern"]
)


def _sig_tokens(tokens: list[Token]) -> list[int]:
    """Indices of structurally significant (non-comment) tokens."""
    return [i for i, t in enumerate(tokens) if t.kind is not TokenKind.COMMENT]


class _Scanner:
    def __init__(self, tokens: list[Token], file_path: str):
        self.all = tokens
        self.sig = _sig_tokens(tokens)
        self.file = file_path
        self.records: list[FunctionRecord] = []

    def tok(self, si: int) -> Token:
        return self.all[self.sig[si]]

    def text(self, si: int) -> str:
        return self.tok(si).text

    def match_parens(self, si: int) -> int:
        """si points at '('; return index of the matching ')'."""
        depth = 0
        i = si
        while i < len(self.sig):
            t = self.text(i)
            if t == "(":
                depth += 1
            elif t == ")":
                depth -= 1
                if depth == 0:
                    return i
            i += 1
        raise UnbalancedBraces(f"{self.file}: unmatched '(' at line {self.tok(si).line}")

    def match_braces(self, si: int) -> int:
        """si points at '{'; return index of the matching '}'."""
        depth = 0
        i = si
        while i < len(self.sig):
            t = self.text(i)
            if t == "{":
                depth += 1
            elif t == "}":
                depth -= 1
                if depth == 0:
                    return i
            i += 1
        raise UnbalancedBraces(f"{self.file}: unmatched '{{' at line {self.tok(si).line}")

    def skip_angles(self, si: int) -> int:
        """si points at '<'; return index just past the balanced '>' (handles '>>')."""
        depth = 0
        i = si
        while i < len(self.sig):
            t = self.text(i)
            if t == "<":
                depth += 1
            elif t == ">":
                depth -= 1
                if depth == 0:
                    return i + 1
            elif t == ">>":
                depth -= 2
                if depth <= 0:
                    return i + 1
            elif t in (";", "{"):
                return i  # bail: was a comparison, not template args
            i += 1
        return i

    def skip_statement(self, si: int) -> int:
        """Advance past the next ';' at current depth, crossing balanced groups."""
        i = si
        while i < len(self.sig):
            t = self.text(i)
            if t == ";":
                return i + 1
            if t == "(":
                i = self.match_parens(i) + 1
                continue
            if t == "{":
                i = self.match_braces(i) + 1
                continue
            if t == "}":
                return i  # let the caller handle scope close
            i += 1
        return i

    def scan(self) -> list[FunctionRecord]:
        scope: list[tuple[str, Optional[str]]] = []
        i = 0
        decl_start = 0

        def boundary(nxt: int) -> None:
            nonlocal decl_start
            decl_start = nxt

        while i < len(self.sig):
            t = self.text(i)
            kind = self.tok(i).kind

            if t == ";":
                i += 1
                boundary(i)
                continue
            if t == "{":
                scope.append(("block", None))
                i += 1
                boundary(i)
                continue
            if t == "}":
                if scope:
                    scope.pop()
                i += 1
                boundary(i)
                continue

            if t == "namespace":
                j = i + 1
                name = None
                if j < len(self.sig) and self.tok(j).kind is TokenKind.IDENTIFIER:
                    name = self.text(j)
                    j += 1
                if j < len(self.sig) and self.text(j) == "{":
                    scope.append(("namespace", name))
                    i = j + 1
                    boundary(i)
                else:
                    i = self.skip_statement(j)
                    boundary(i)
                continue

            if t in ("class", "struct", "union", "enum") and kind is TokenKind.KEYWORD:
                j = i + 1
                name = None
                while j < len(self.sig):
                    tj = self.text(j)
                    if tj == "<":
                        j = self.skip_angles(j)
                        continue
                    if tj in ("{", ";", "=", "("):
                        break
                    if self.tok(j).kind is TokenKind.IDENTIFIER and name is None:
                        name = tj
                    if tj == ":":
                        break
                    j += 1
                if j < len(self.sig) and self.text(j) == ":":
                    while j < len(self.sig) and self.text(j) not in ("{", ";"):
                        j += 1
                if j >= len(self.sig) or self.text(j) != "{":
                    i = self.skip_statement(i)
                    boundary(i)
                    continue
                if t == "enum":
                    i = self.match_braces(j) + 1  # enumerators hold no functions
                    boundary(i)
                else:
                    scope.append(("class", name))
                    i = j + 1
                    boundary(i)
                continue

            if t == "template":
                j = i + 1
                if j < len(self.sig) and self.text(j) == "<":
                    i = self.skip_angles(j)
                else:
                    i = j
                continue  # declaration continues; keep decl_start

            if t == "extern" and i + 1 < len(self.sig) and self.tok(i + 1).kind is TokenKind.STRING:
                if i + 2 < len(self.sig) and self.text(i + 2) == "{":
                    scope.append(("namespace", None))
                    i += 3
                    boundary(i)
                else:
                    i += 2
                continue

            if t in ("public", "private", "protected") and i + 1 < len(self.sig) and self.text(i + 1) == ":":
                i += 2
                boundary(i)
                continue

            if t in ("using", "typedef", "friend", "static_assert"):
                i = self.skip_statement(i)
                boundary(i)
                continue

            cand = self._try_function(i, decl_start, scope)
            if cand is not None:
                i = cand
                boundary(i)
                continue

            i += 1

        return self.records

    def _fn_name_at(self, i: int) -> Optional[tuple[str, int]]:
        """Return (name, index of '(') when a callable name starts at i."""
        t = self.text(i)
        kind = self.tok(i).kind
        if t == "operator":
            if i + 2 < len(self.sig) and self.text(i + 1) == "(" and self.text(i + 2) == ")":
                if i + 3 < len(self.sig) and self.text(i + 3) == "(":
                    return "operator()", i + 3
                return None
            if i + 2 < len(self.sig) and self.text(i + 2) == "(":
                return "operator" + self.text(i + 1), i + 2
            return None
        if t == "~":
            if (
                i + 2 < len(self.sig)
                and self.tok(i + 1).kind is TokenKind.IDENTIFIER
                and self.text(i + 2) == "("
            ):
                return "~" + self.text(i + 1), i + 2
            return None
        if kind is TokenKind.IDENTIFIER and i + 1 < len(self.sig) and self.text(i + 1) == "(":
            return t, i + 1
        return None

    def _try_function(self, i: int, decl_start: int, scope) -> Optional[int]:
        """If a function definition starts at sig index i, record it and
        return the sig index just past its body; otherwise None."""
        named = self._fn_name_at(i)
        if named is None:
            return None
        name, open_paren = named
        try:
            close_paren = self.match_parens(open_paren)
        except UnbalancedBraces:
            raise
        body = self._find_body(close_paren + 1)
        if body is None:
            return None
        body_close = self.match_braces(body)

        parents = [n for _, n in scope if n]
        qname = "::".join(parents + [name]) if parents else name

        start_all = self.sig[decl_start]
        end_all = self.sig[body_close]
        toks = tuple(self.all[start_all : end_all + 1])
        span = (toks[0].line, self.all[end_all].line)
        rec = FunctionRecord(
            id=f"{self.file}::{qname}@{span[0]}",
            name=qname,
            file=self.file,
            span=span,
            tokens=toks,
        )
        self.records.append(rec)
        return body_close + 1

    def _find_body(self, j: int) -> Optional[int]:
        """Scan trailing specifiers/ctor-initializers after ')' for the body '{'."""
        while j < len(self.sig):
            t = self.text(j)
            if t == "{":
                return j
            if t in (";", ",", ")", "}"):
                return None
            if t == "=":
                return None  # "= default;", "= delete;", "= 0;" or an initializer
            if t == ":":
                return self._skip_ctor_init(j + 1)
            if t in ("noexcept", "throw") and j + 1 < len(self.sig) and self.text(j + 1) == "(":
                j = self.match_parens(j + 1) + 1
                continue
            if t == "->":
                j += 1
                continue
            if t == "<":
                j = self.skip_angles(j)
                continue
            if t == "(":
                j = self.match_parens(j) + 1
                continue
            if (
                t in _TRAILING_OK
                or self.tok(j).kind in (TokenKind.IDENTIFIER, TokenKind.TYPE_NAME)
                or t in ("*", "&", "&&", "::")
            ):
                j += 1
                continue
            return None
        return None

    def _skip_ctor_init(self, j: int) -> Optional[int]:
        """Parse "member(args), member{args}, ..." and return the body '{' index."""
        while j < len(self.sig):
            if self.tok(j).kind not in (TokenKind.IDENTIFIER, TokenKind.TYPE_NAME):
                return None
            j += 1
            if j < len(self.sig) and self.text(j) == "<":
                j = self.skip_angles(j)
            if j >= len(self.sig):
                return None
            if self.text(j) == "(":
                j = self.match_parens(j) + 1
            elif self.text(j) == "{":
                j = self.match_braces(j) + 1
            else:
                return None
            if j < len(self.sig) and self.text(j) == ",":
                j += 1
                continue
            if j < len(self.sig) and self.text(j) == "{":
                return j
            return None
        return None


def extract_functions(source_text: str, file_path: str) -> list[FunctionRecord]:
    """Extract function definitions from one C++ source file.

    Nested functions and lambdas fold into the enclosing definition because
    bodies are skipped wholesale. Raises UnbalancedBraces (callers skip the
    file with a diagnostic) and LexError on untokenizable input.
    """
    tokens = lex(source_text)
    if not tokens:
        return []
    return _Scanner(tokens, file_path).scan()


def _is_punct(tok: Token, text: str) -> bool:
    return tok.kind is TokenKind.PUNCT and tok.text == text


def find_declarations(tokens: Iterable[Token]) -> list[tuple[str, tuple[str, ...]]]:
    """Best-effort lexical scan for declarations.

    Returns (variable_name, type_names) pairs covering parameter lists, local
    declarations, and template arguments. Misses are acceptable; the result
    only feeds similarity features.
    """
    sig = [t for t in tokens if t.kind is not TokenKind.COMMENT]
    out: list[tuple[str, tuple[str, ...]]] = []
    n = len(sig)

    def parse_decl(k: int) -> Optional[tuple[int, str, tuple[str, ...]]]:
        """Try to parse a declaration starting at k; return (next, var, types)."""
        types: list[str] = []
        while k < n and sig[k].text in _CV_MODS:
            k += 1
        if k >= n:
            return None
        base = sig[k]
        if base.kind not in (TokenKind.TYPE_NAME, TokenKind.IDENTIFIER):
            return None
        types.append(base.text)
        k += 1
        # Fundamental-type sequences: "unsigned long", "long long", ...
        if base.kind is TokenKind.TYPE_NAME:
            while k < n and sig[k].kind is TokenKind.TYPE_NAME and sig[k].text in BUILTIN_TYPES:
                types.append(sig[k].text)
                k += 1
        if k < n and _is_punct(sig[k], "<"):
            depth = 0
            while k < n:
                t = sig[k].text
                if t == "<":
                    depth += 1
                elif t == ">":
                    depth -= 1
                    if depth == 0:
                        k += 1
                        break
                elif t == ">>":
                    depth -= 2
                    if depth <= 0:
                        k += 1
                        break
                elif sig[k].kind in (TokenKind.TYPE_NAME, TokenKind.IDENTIFIER) and t not in _CV_MODS:
                    types.append(t)
                elif t in (";", "{", ")"):
                    return None  # ran off: '<' was a comparison
                k += 1
        while k < n and sig[k].text in ("*", "&", "&&"):
            k += 1
        if k >= n or sig[k].kind is not TokenKind.IDENTIFIER or "::" in sig[k].text:
            return None
        var = sig[k].text
        k += 1
        if k < n and sig[k].text in ("=", ";", ",", ")", "{", "[", ":"):
            return (k, var, tuple(types))
        if k < n and sig[k].text == "(":
            # Constructor-style init "T x(args);" -- accept when followed by ; or ,
            try_close = k
            depth = 0
            while try_close < n:
                if sig[try_close].text == "(":
                    depth += 1
                elif sig[try_close].text == ")":
                    depth -= 1
                    if depth == 0:
                        break
                try_close += 1
            if try_close + 1 < n and sig[try_close + 1].text in (";", ","):
                return (try_close + 1, var, tuple(types))
        return None

    # Parameter list: contents of the first top-level paren group.
    first_open = next((k for k, t in enumerate(sig) if t.text == "("), None)
    if first_open is not None:
        depth = 0
        k = first_open
        close = None
        while k < n:
            if sig[k].text == "(":
                depth += 1
            elif sig[k].text == ")":
                depth -= 1
                if depth == 0:
                    close = k
                    break
            k += 1
        if close is not None:
            seg_start = first_open + 1
            k = seg_start
            d = 0
            while k <= close:
                t = sig[k].text
                if t == "(":
                    d += 1
                elif t == ")":
                    d -= 1
                if (t == "," and d == 0) or k == close:
                    got = parse_decl(seg_start)
                    if got is not None:
                        out.append((got[1], got[2]))
                    else:
                        # Unnamed parameter: still collect type tokens.
                        seg = sig[seg_start:k]
                        tnames = [
                            s.text
                            for s in seg
                            if s.kind is TokenKind.TYPE_NAME
                            or (s.kind is TokenKind.IDENTIFIER and "::" in s.text)
                        ]
                        if tnames:
                            out.append(("", tuple(tnames)))
                    seg_start = k + 1
                k += 1

    # Statement starts inside the body (and loop headers). Position 0 counts
    # too: bare statement snippets can open with a declaration.
    starts = [0]
    for k, t in enumerate(sig):
        if t.text in (";", "{", "}"):
            starts.append(k + 1)
        elif t.text == "(" and k > 0 and sig[k - 1].text in ("for", "if", "while", "switch"):
            starts.append(k + 1)
    for k in starts:
        if k >= n:
            continue
        got = parse_decl(k)
        if got is not None:
            out.append((got[1], got[2]))
    return out


def annotate_types(record: FunctionRecord) -> FunctionRecord:
    """Populate type_set from parameter/local declarations and template
    arguments, and upgrade matching identifier tokens to type_name kind."""
    types: set[str] = set()
    for _, tnames in find_declarations(record.tokens):
        types.update(tnames)
    new_tokens = tuple(
        Token(t.text, TokenKind.TYPE_NAME, t.line)
        if t.kind is TokenKind.IDENTIFIER and t.text in types
        else t
        for t in record.tokens
    )
    return replace(record, tokens=new_tokens, type_set=frozenset(types))


def attach_cost(
    record: FunctionRecord, costs: Mapping[str, CostAnnotation]
) -> FunctionRecord:
    """Attach the cost annotation for this record's id, when present."""
    cost = costs.get(record.id)
    if cost is None:
        return record
    return replace(record, cost=cost)


def extract_file(path: str | Path) -> list[FunctionRecord]:
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    return [annotate_types(r) for r in extract_functions(text, str(path))]


def write_records(records: Iterable[FunctionRecord], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
            count += 1
    return count


def read_records(path: str | Path) -> list[FunctionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.strip()
            if ln:
                records.append(FunctionRecord.from_json(json.loads(ln)))
    return records
