"""Heuristic C++ lexer producing a flat token stream with line numbers.

No preprocessing or semantic analysis happens here: macros are not expanded,
and preprocessor directives are emitted as comment-kind tokens so that later
stages can drop them uniformly.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from . import PerfOptError


class LexError(PerfOptError):
    """Input could not be tokenized (unterminated literal or comment)."""


class TokenKind(enum.Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    TYPE_NAME = "type_name"
    NUMBER = "literal_number"
    STRING = "literal_string"
    PUNCT = "punctuation"
    COMMENT = "comment"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    line: int  # 1-based

    def to_json(self) -> list:
        return [self.text, self.kind.value, self.line]

    @staticmethod
    def from_json(obj: list) -> "Token":
        return Token(obj[0], TokenKind(obj[1]), obj[2])


# C++ keywords, minus the fundamental type keywords which get TYPE_NAME kind.
KEYWORDS = frozenset("""
    alignas alignof and and_eq asm bitand bitor break case catch class compl
    concept const consteval constexpr constinit const_cast continue co_await
    co_return co_yield decltype default delete do dynamic_cast else enum
    explicit export extern false final for friend goto if inline mutable
    namespace new noexcept not not_eq nullptr operator or or_eq override
    private protected public register reinterpret_cast requires return sizeof
    static static_assert static_cast struct switch template this thread_local
    throw true try typedef typeid typename union using virtual volatile while
    xor xor_eq
""".split())

# Fundamental types plus the <cstdint>/<cstddef> spellings common in C++ code.
BUILTIN_TYPES = frozenset("""
    auto bool char char8_t char16_t char32_t double float int long short
    signed unsigned void wchar_t
    size_t ssize_t ptrdiff_t intptr_t uintptr_t
    int8_t int16_t int32_t int64_t uint8_t uint16_t uint32_t uint64_t
""".split())

# Multi-character operators, longest first so the scanner is greedy.
_MULTI_PUNCT = sorted(
    [
        "<=>", "<<=", ">>=", "->*", "...", "::", "->", "<<", ">>", "<=", ">=", "==",
        "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
        "++", "--", ".*", "##",
    ],
    key=len,
    reverse=True,
)

_SINGLE_PUNCT = "{}()[];,<>=+-*/%&|^~!?.:#@"

# Every punctuation spelling the lexer can emit, for term-level filtering.
PUNCT_TEXTS = frozenset(_MULTI_PUNCT) | frozenset(_SINGLE_PUNCT)

_ID_RE = re.compile(r"[A-Za-z_]\w*(?:::[A-Za-z_]\w*)*")
_NUM_RE = re.compile(
    r"(?:0[xX][0-9a-fA-F]+|0[bB][01]+|\d+\.\d*(?:[eE][+-]?\d+)?"
    r"|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)[uUlLfF]*"
)
_STR_PREFIX_RE = re.compile(r'(?:u8|u|U|L)?R?"')


def _classify_name(text: str) -> TokenKind:
    if "::" in text:
        return TokenKind.IDENTIFIER
    if text in BUILTIN_TYPES:
        return TokenKind.TYPE_NAME
    if text in KEYWORDS:
        return TokenKind.KEYWORD
    return TokenKind.IDENTIFIER


def lex(source: str) -> list[Token]:
    """Tokenize C++ source. Raises LexError on unterminated constructs.

    Qualified names like ``std::vector`` are glued into a single identifier
    token when written without internal whitespace.
    """
    tokens: list[Token] = []
    i = 0
    line = 1
    n = len(source)
    at_line_start = True

    while i < n:
        c = source[i]

        if c == "\n":
            line += 1
            i += 1
            at_line_start = True
            continue
        if c in " \t\r\f\v":
            i += 1
            continue

        # Preprocessor directive: whole logical line, backslash continuations.
        if c == "#" and at_line_start:
            start = i
            start_line = line
            while i < n:
                j = source.find("\n", i)
                if j == -1:
                    i = n
                    break
                if j > 0 and source[j - 1] == "\\":
                    line += 1
                    i = j + 1
                    continue
                i = j
                break
            tokens.append(Token(source[start:i], TokenKind.COMMENT, start_line))
            continue

        at_line_start = False

        if c == "/" and i + 1 < n:
            if source[i + 1] == "/":
                j = source.find("\n", i)
                if j == -1:
                    j = n
                tokens.append(Token(source[i:j], TokenKind.COMMENT, line))
                i = j
                continue
            if source[i + 1] == "*":
                j = source.find("*/", i + 2)
                if j == -1:
                    raise LexError(f"unterminated block comment at line {line}")
                text = source[i : j + 2]
                tokens.append(Token(text, TokenKind.COMMENT, line))
                line += text.count("\n")
                i = j + 2
                continue

        m = _STR_PREFIX_RE.match(source, i)
        if m:
            if m.group().endswith('R"'):
                dpos = m.end()
                paren = source.find("(", dpos)
                if paren == -1:
                    raise LexError(f"malformed raw string at line {line}")
                delim = source[dpos:paren]
                close = source.find(")" + delim + '"', paren + 1)
                if close == -1:
                    raise LexError(f"unterminated raw string at line {line}")
                end = close + len(delim) + 2
                text = source[i:end]
                tokens.append(Token(text, TokenKind.STRING, line))
                line += text.count("\n")
                i = end
                continue
            j = m.end()
            while j < n:
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == '"':
                    break
                j += 1
            if j >= n:
                raise LexError(f"unterminated string literal at line {line}")
            text = source[i : j + 1]
            tokens.append(Token(text, TokenKind.STRING, line))
            line += text.count("\n")
            i = j + 1
            continue

        if c == "'":
            j = i + 1
            while j < n:
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == "'":
                    break
                j += 1
            if j >= n:
                raise LexError(f"unterminated character literal at line {line}")
            tokens.append(Token(source[i : j + 1], TokenKind.STRING, line))
            i = j + 1
            continue

        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUM_RE.match(source, i)
            tokens.append(Token(m.group(), TokenKind.NUMBER, line))
            i = m.end()
            continue

        if c.isalpha() or c == "_":
            m = _ID_RE.match(source, i)
            text = m.group()
            tokens.append(Token(text, _classify_name(text), line))
            i = m.end()
            continue

        for op in _MULTI_PUNCT:
            if source.startswith(op, i):
                tokens.append(Token(op, TokenKind.PUNCT, line))
                i += len(op)
                break
        else:
            tokens.append(Token(c, TokenKind.PUNCT, line))
            i += 1

    return tokens


def render_source(tokens: list[Token]) -> str:
    """Reconstruct compilable-ish source: tokens joined by single spaces,
    grouped into their original lines.

    Line comments and preprocessor directives terminate at end of line, so a
    pure single-space join would swallow following tokens; the line grouping
    keeps re-lexing of the rendered text faithful.
    """
    lines: list[list[str]] = []
    cur_line = None
    for tok in tokens:
        if tok.line != cur_line:
            lines.append([])
            cur_line = tok.line
        lines[-1].append(tok.text)
        cur_line = tok.line + tok.text.count("\n")
    return "\n".join(" ".join(parts) for parts in lines)
