"""Bag-of-words code embeddings.

Token streams are normalized so that surface naming stops mattering:
identifiers become positional placeholders (first distinct name -> id0, next
-> id1, ...), literals collapse to <str>/<num>, comments vanish. Keywords,
type names, and punctuation survive normalization as themselves; embedding
then counts everything except punctuation and stoplisted terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from . import PerfOptError
from .lexer import PUNCT_TEXTS, Token, TokenKind, lex

# Stoplist of keywords too common to discriminate between functions.
DEFAULT_STOPLIST = frozenset({"return"})

STR_PLACEHOLDER = "<str>"
NUM_PLACEHOLDER = "<num>"

NormalizedTokens = list[str]


class EmptyDiff(PerfOptError):
    """No code tokens could be drawn from a diff."""


def normalize(tokens: Iterable[Token]) -> NormalizedTokens:
    """Map a token stream to normalized terms, keeping order.

    Comments are dropped outright; everything else survives one-for-one, so
    sequence metrics downstream keep their alignment.
    """
    placeholders: dict[str, str] = {}
    terms: list[str] = []
    for tok in tokens:
        if tok.kind is TokenKind.COMMENT:
            continue
        if tok.kind is TokenKind.STRING:
            terms.append(STR_PLACEHOLDER)
        elif tok.kind is TokenKind.NUMBER:
            terms.append(NUM_PLACEHOLDER)
        elif tok.kind is TokenKind.IDENTIFIER:
            if tok.text not in placeholders:
                placeholders[tok.text] = f"id{len(placeholders)}"
            terms.append(placeholders[tok.text])
        else:
            terms.append(tok.text)
    return terms


@dataclass(frozen=True)
class BowVector:
    """Sparse term-count vector with its Euclidean norm cached."""

    counts: Mapping[str, float]
    l2_norm: float = field(init=False)

    def __post_init__(self):
        # Store terms in sorted order so norms and dot products sum in a
        # fixed order: vectors with equal content then behave identically
        # down to the last bit, including after a JSON round trip.
        canon = {t: self.counts[t] for t in sorted(self.counts)}
        object.__setattr__(self, "counts", canon)
        norm = math.sqrt(sum(v * v for v in canon.values()))
        object.__setattr__(self, "l2_norm", norm)

    @property
    def is_zero(self) -> bool:
        return self.l2_norm == 0.0

    def dot(self, other: "BowVector") -> float:
        a, b = self.counts, other.counts
        if len(b) < len(a):
            a, b = b, a
        return sum(v * b[t] for t, v in a.items() if t in b)

    def cosine(self, other: "BowVector") -> float:
        if self.is_zero or other.is_zero:
            return 0.0
        # Clamp: rounding in norm*norm can push a self-cosine a ulp past 1.
        return min(1.0, self.dot(other) / (self.l2_norm * other.l2_norm))

    def distance(self, other: "BowVector") -> float:
        """Cosine distance, in [0,1] for count vectors."""
        return 1.0 - self.cosine(other)

    def restrict(self, terms: Iterable[str]) -> "BowVector":
        keep = set(terms)
        return BowVector({t: v for t, v in self.counts.items() if t in keep})

    def to_json(self) -> dict:
        return dict(self.counts)

    @staticmethod
    def from_json(obj: Mapping[str, float]) -> "BowVector":
        return BowVector(dict(obj))


def embed_bow(
    norm: NormalizedTokens, stoplist: frozenset[str] = DEFAULT_STOPLIST
) -> BowVector:
    """Count normalized terms, excluding punctuation and the stoplist."""
    counts: dict[str, float] = {}
    for term in norm:
        if term in stoplist or term in PUNCT_TEXTS:
            continue
        counts[term] = counts.get(term, 0.0) + 1.0
    return BowVector(counts)


def embed_tokens(
    tokens: Iterable[Token], stoplist: frozenset[str] = DEFAULT_STOPLIST
) -> BowVector:
    return embed_bow(normalize(tokens), stoplist)


def embed_source(source: str, stoplist: frozenset[str] = DEFAULT_STOPLIST) -> BowVector:
    return embed_tokens(lex(source), stoplist)


def diff_before_lines(diff_text: str) -> list[str]:
    """The "before" side of every hunk: context plus removed lines.

    Queries built from diffs should look like the code being replaced, not
    like its fix, so added lines stay out.
    """
    lines: list[str] = []
    in_hunk = False
    expect = 0
    for raw in diff_text.splitlines():
        if raw.startswith("@@"):
            in_hunk = True
            continue
        if raw.startswith(("---", "+++", "diff ", "index ")):
            if raw.startswith(("---", "+++")):
                in_hunk = False
            continue
        if not in_hunk:
            continue
        if raw.startswith(("-", " ")) :
            lines.append(raw[1:])
        elif raw.startswith(("+", "\\")):
            continue
        elif raw == "":
            lines.append("")
        else:
            in_hunk = False
    return lines


def embed_diff_query(
    diff: Union[str, "object"], stoplist: frozenset[str] = DEFAULT_STOPLIST
) -> BowVector:
    """Embed the before-side of a diff (an AntiPatternExample or raw text)."""
    diff_text = getattr(diff, "diff", diff)
    if not isinstance(diff_text, str):
        raise TypeError("expected diff text or an object with a .diff string")
    lines = diff_before_lines(diff_text)
    if not any(ln.strip() for ln in lines):
        raise EmptyDiff("no before-side code in diff")
    try:
        tokens = lex("\n".join(lines))
    except PerfOptError as exc:
        raise EmptyDiff(f"hunk text does not lex: {exc}") from exc
    vec = embed_tokens(tokens, stoplist)
    if vec.is_zero:
        raise EmptyDiff("diff contains no countable code tokens")
    return vec
